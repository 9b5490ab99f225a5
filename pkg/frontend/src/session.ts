/**
 * Headless session state the page renders from. One controller per live
 * session: it owns the query cards, their editors, the metric series and
 * per-card errors, and reconciles with the server after every response.
 */

import { ApiError, type Client, type QueryCard, type SessionInfo } from "./api.js";
import { appendRetrain, fromMetrics, initSeries, type MetricPoint } from "./chart.js";
import { clearDraft, loadEditor, saveDraft, type StorageLike } from "./drafts.js";
import {
  correctionOf,
  setBar,
  setLabel,
  skipPayload,
  toggleIrrelevant,
  type CardEditor,
} from "./editor.js";
import { serializeCorrection } from "./payload.js";

export type CardStatus = "pending" | "submitted" | "skipped";

export interface CardView {
  card: QueryCard;
  editor: CardEditor;
  status: CardStatus;
  error: string | null;
}

export class SessionController {
  session: SessionInfo | null = null;
  cards: CardView[] = [];
  series: MetricPoint[] = [];
  iteration = 0;
  complete = false;
  banner: string | null = null;

  constructor(
    private readonly client: Client,
    private readonly store: StorageLike,
  ) {}

  private get sessionId(): string {
    if (this.session === null) throw new Error("no session started");
    return this.session.session_id;
  }

  async start(strategy: string, configPath?: string): Promise<void> {
    this.session = await this.client.createSession(strategy, configPath);
    this.series = initSeries(this.session);
    this.iteration = this.session.iteration;
    this.complete = false;
    this.cards = [];
    this.banner = null;
  }

  /** Fetch pending samples and hydrate editors, drafts included. */
  async refreshQuery(): Promise<void> {
    const session = this.session;
    if (session === null) throw new Error("no session started");
    try {
      const q = await this.client.query(session.session_id);
      this.iteration = q.iteration;
      this.complete = q.complete;
      this.cards = q.pending.map((card) => ({
        card,
        editor: loadEditor(this.store, session.session_id, card, session.task),
        status: "pending" as CardStatus,
        error: null,
      }));
      this.banner = null;
    } catch (err) {
      this.banner = describe(err);
      throw err;
    }
  }

  private view(sampleId: number): CardView {
    const view = this.cards.find((c) => c.card.sample_id === sampleId);
    if (view === undefined) throw new Error(`no pending card ${sampleId}`);
    return view;
  }

  private updateEditor(view: CardView, editor: CardEditor): void {
    view.editor = editor;
    saveDraft(this.store, this.sessionId, editor, view.card);
  }

  editBar(sampleId: number, index: number, raw: number): void {
    const view = this.view(sampleId);
    this.updateEditor(view, setBar(view.editor, index, raw));
  }

  markIrrelevant(sampleId: number, index: number): void {
    const view = this.view(sampleId);
    this.updateEditor(view, toggleIrrelevant(view.editor, index));
  }

  editLabel(sampleId: number, label: number): void {
    const view = this.view(sampleId);
    this.updateEditor(view, setLabel(view.editor, label));
  }

  /** Serialized bytes this card would put on the wire right now. */
  payloadFor(sampleId: number): string {
    return serializeCorrection(correctionOf(this.view(sampleId).editor));
  }

  async submit(sampleId: number): Promise<void> {
    const view = this.view(sampleId);
    try {
      await this.client.submitCorrection(this.sessionId, this.payloadFor(sampleId));
      view.status = "submitted";
      view.error = null;
      clearDraft(this.store, this.sessionId, sampleId);
    } catch (err) {
      view.error = describe(err);
    }
  }

  async skip(sampleId: number): Promise<void> {
    const view = this.view(sampleId);
    try {
      await this.client.submitCorrection(this.sessionId, serializeCorrection(skipPayload(sampleId)));
      view.status = "skipped";
      view.error = null;
      clearDraft(this.store, this.sessionId, sampleId);
    } catch (err) {
      view.error = describe(err);
    }
  }

  get canRetrain(): boolean {
    return this.cards.length > 0 && this.cards.every((c) => c.status !== "pending");
  }

  async retrain(): Promise<void> {
    const resp = await this.client.retrain(this.sessionId);
    this.series = appendRetrain(this.series, resp);
    this.iteration = resp.iteration;
    this.complete = resp.complete;
  }

  /** Replace the local series with the server's, the single source of truth. */
  async refreshMetrics(): Promise<void> {
    const resp = await this.client.metrics(this.sessionId);
    this.series = fromMetrics(resp);
    this.complete = resp.complete;
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.detail;
  if (err instanceof Error) return err.message;
  return String(err);
}
