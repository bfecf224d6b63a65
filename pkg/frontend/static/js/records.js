/**
 * Newline-delimited JSON records spoken by the auth-client bridge.
 *
 * Inbound (bridge -> console): SESSION_STATE and LEVELS.
 * Outbound (console -> bridge): KEY, FINISH and, in demo mode, STEER.
 * One record per line; unknown record types are surfaced as errors so a
 * misconfigured endpoint is noticed immediately.
 */
const LEVEL_SYMBOLS = new Set(['S', 'L', 'N', 'R', 'H']);
export function encodeRecord(record) {
    return JSON.stringify(record) + '\n';
}
export function decodeInbound(line) {
    let parsed;
    try {
        parsed = JSON.parse(line);
    }
    catch (err) {
        throw new Error(`bridge sent a non-JSON line: ${String(err)}`);
    }
    if (typeof parsed !== 'object' || parsed === null || Array.isArray(parsed)) {
        throw new Error('bridge record must be a JSON object');
    }
    const record = parsed;
    switch (record.type) {
        case 'SESSION_STATE':
            return asSessionState(record);
        case 'LEVELS':
            return asLevels(record);
        default:
            throw new Error(`unexpected bridge record type ${String(record.type)}`);
    }
}
function asSessionState(r) {
    const phase = r.phase;
    if (phase !== 'collecting' &&
        phase !== 'submitted' &&
        phase !== 'done' &&
        phase !== 'error') {
        throw new Error(`bad session phase ${String(phase)}`);
    }
    const out = { type: 'SESSION_STATE', phase };
    if (typeof r.user_id === 'string')
        out.user_id = r.user_id;
    if (typeof r.typed === 'number')
        out.typed = r.typed;
    if (typeof r.ok === 'boolean')
        out.ok = r.ok;
    if (typeof r.reason === 'string')
        out.reason = r.reason;
    if (typeof r.pels === 'number')
        out.pels = r.pels;
    if (typeof r.candidates === 'number')
        out.candidates = r.candidates;
    const q = r.quantizer;
    if (q &&
        Array.isArray(q.band_edges) &&
        q.band_edges.length === 4 &&
        typeof q.hysteresis_margin === 'number') {
        out.quantizer = {
            band_edges: q.band_edges.map(Number),
            hysteresis_margin: q.hysteresis_margin,
        };
    }
    return out;
}
function asLevels(r) {
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
        t_ms: r.t_ms,
        attention: r.attention,
        meditation: r.meditation,
        attention_level: r.attention_level,
        meditation_level: r.meditation_level,
        attention_near_edge: Boolean(r.attention_near_edge),
        meditation_near_edge: Boolean(r.meditation_near_edge),
    };
}
/** Splits a socket chunk stream back into complete lines. */
export class LineSplitter {
    buffer = '';
    push(chunk) {
        this.buffer += chunk;
        const lines = this.buffer.split('\n');
        this.buffer = lines.pop() ?? '';
        return lines.filter((l) => l.length > 0);
    }
}
