/**
 * Replays a transcript recorded from a live service. Each fetch consumes the
 * first unconsumed exchange whose method, path and (for POSTs) exact body
 * bytes match, so a test fails loudly the moment the client deviates from
 * what the real server saw.
 */

import { readFileSync } from "node:fs";
import type { FetchLike, HttpResponse } from "../src/api.js";

export interface Exchange {
  method: string;
  path: string;
  request: string | null;
  status: number;
  response: string;
}

export interface Transcript {
  recorded_with: string;
  exchanges: Exchange[];
}

export function loadTranscript(): Transcript {
  const url = new URL("./recorded/titanic-session.json", import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as Transcript;
}

export class RecordedService {
  private readonly consumed: boolean[];

  constructor(private readonly exchanges: Exchange[]) {
    this.consumed = exchanges.map(() => false);
  }

  get remaining(): number {
    return this.consumed.filter((c) => !c).length;
  }

  readonly fetchLike: FetchLike = (url, init) => {
    const method = init?.method ?? "GET";
    const body = typeof init?.body === "string" ? init.body : null;
    const path = url.replace(/^https?:\/\/[^/]*/, "");
    const index = this.exchanges.findIndex(
      (e, i) =>
        !this.consumed[i] &&
        e.method === method &&
        e.path === path &&
        (e.request === null || body === null || e.request === body),
    );
    if (index === -1) {
      return Promise.reject(
        new Error(`no recorded exchange for ${method} ${path} with body ${body ?? "<none>"}`),
      );
    }
    this.consumed[index] = true;
    const exchange = this.exchanges[index];
    const response: HttpResponse = {
      ok: exchange.status >= 200 && exchange.status < 300,
      status: exchange.status,
      text: () => Promise.resolve(exchange.response),
    };
    return Promise.resolve(response);
  };
}

/** Fetch stub that always fails, for unreachable-service paths. */
export const unreachable: FetchLike = () => Promise.reject(new Error("connection refused"));
