/**
 * Newline-delimited JSON records spoken by the auth-client bridge.
 *
 * Inbound (bridge -> console): SESSION_STATE and LEVELS.
 * Outbound (console -> bridge): KEY, FINISH and, in demo mode, STEER.
 * One record per line; unknown record types are surfaced as errors so a
 * misconfigured endpoint is noticed immediately.
 */

export interface QuantizerInfo {
  band_edges: number[];
  hysteresis_margin: number;
}

export interface SessionStateRecord {
  type: 'SESSION_STATE';
  phase: 'collecting' | 'submitted' | 'done' | 'error';
  user_id?: string;
  typed?: number;
  quantizer?: QuantizerInfo;
  ok?: boolean;
  reason?: string;
  pels?: number;
  candidates?: number;
}

export interface LevelsRecord {
  type: 'LEVELS';
  t_ms: number;
  attention: number;
  meditation: number;
  attention_level: string;
  meditation_level: string;
  attention_near_edge: boolean;
  meditation_near_edge: boolean;
}

export interface KeyRecord {
  type: 'KEY';
  ch: string;
}

export interface FinishRecord {
  type: 'FINISH';
}

export interface SteerRecord {
  type: 'STEER';
  attention?: number;
  meditation?: number;
}

export type InboundRecord = SessionStateRecord | LevelsRecord;
export type OutboundRecord = KeyRecord | FinishRecord | SteerRecord;

const LEVEL_SYMBOLS = new Set(['S', 'L', 'N', 'R', 'H']);

export function encodeRecord(record: OutboundRecord): string {
  return JSON.stringify(record) + '\n';
}

export function decodeInbound(line: string): InboundRecord {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch (err) {
    throw new Error(`bridge sent a non-JSON line: ${String(err)}`);
  }
  if (typeof parsed !== 'object' || parsed === null || Array.isArray(parsed)) {
    throw new Error('bridge record must be a JSON object');
  }
  const record = parsed as Record<string, unknown>;
  switch (record.type) {
    case 'SESSION_STATE':
      return asSessionState(record);
    case 'LEVELS':
      return asLevels(record);
    default:
      throw new Error(`unexpected bridge record type ${String(record.type)}`);
  }
}

function asSessionState(r: Record<string, unknown>): SessionStateRecord {
  const phase = r.phase;
  if (
    phase !== 'collecting' &&
    phase !== 'submitted' &&
    phase !== 'done' &&
    phase !== 'error'
  ) {
    throw new Error(`bad session phase ${String(phase)}`);
  }
  const out: SessionStateRecord = { type: 'SESSION_STATE', phase };
  if (typeof r.user_id === 'string') out.user_id = r.user_id;
  if (typeof r.typed === 'number') out.typed = r.typed;
  if (typeof r.ok === 'boolean') out.ok = r.ok;
  if (typeof r.reason === 'string') out.reason = r.reason;
  if (typeof r.pels === 'number') out.pels = r.pels;
  if (typeof r.candidates === 'number') out.candidates = r.candidates;
  const q = r.quantizer as QuantizerInfo | undefined;
  if (
    q &&
    Array.isArray(q.band_edges) &&
    q.band_edges.length === 4 &&
    typeof q.hysteresis_margin === 'number'
  ) {
    out.quantizer = {
      band_edges: q.band_edges.map(Number),
      hysteresis_margin: q.hysteresis_margin,
    };
  }
  return out;
}

function asLevels(r: Record<string, unknown>): LevelsRecord {
  for (const field of ['t_ms', 'attention', 'meditation']) {
    if (typeof r[field] !== 'number') {
      throw new Error(`LEVELS record missing numeric ${field}`);
    }
  }
  for (const field of ['attention_level', 'meditation_level']) {
    if (!LEVEL_SYMBOLS.has(String(r[field]))) {
      throw new Error(`LEVELS record carries unknown level ${String(r[field])}`);
    }
  }
  return {
    type: 'LEVELS',
    t_ms: r.t_ms as number,
    attention: r.attention as number,
    meditation: r.meditation as number,
    attention_level: r.attention_level as string,
    meditation_level: r.meditation_level as string,
    attention_near_edge: Boolean(r.attention_near_edge),
    meditation_near_edge: Boolean(r.meditation_near_edge),
  };
}

/** Splits a socket chunk stream back into complete lines. */
export class LineSplitter {
  private buffer = '';

  push(chunk: string): string[] {
    this.buffer += chunk;
    const lines = this.buffer.split('\n');
    this.buffer = lines.pop() ?? '';
    return lines.filter((l) => l.length > 0);
  }
}
