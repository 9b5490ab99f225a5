/**
 * Canonical bytes for POST /corrections bodies.
 *
 * The service treats these as plain JSON, but the event log and the golden
 * fixtures compare raw bytes, so serialization is pinned here: compact JSON,
 * fields in the order sample_id, label, attributions, irrelevant, skip, and
 * attribution keys as base-10 feature indices in ascending order.
 */

export interface CorrectionPayload {
  sampleId: number;
  label?: number;
  attributions?: ReadonlyMap<number, number>;
  irrelevant?: readonly number[];
  skip?: boolean;
}

export function serializeCorrection(p: CorrectionPayload): string {
  const body: Record<string, unknown> = { sample_id: p.sampleId };
  if (p.label !== undefined) body.label = p.label;
  if (p.attributions !== undefined) {
    const indices = [...p.attributions.keys()].sort((a, b) => a - b);
    const attributions: Record<string, number> = {};
    for (const i of indices) attributions[String(i)] = p.attributions.get(i)!;
    body.attributions = attributions;
  }
  if (p.irrelevant !== undefined) {
    body.irrelevant = [...p.irrelevant].sort((a, b) => a - b);
  }
  if (p.skip) body.skip = true;
  return JSON.stringify(body);
}
