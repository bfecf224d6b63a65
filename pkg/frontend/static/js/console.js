/**
 * Console state: everything the UI may render, nothing it must not.
 *
 * Holds current raw/quantized levels, the session phase, the count of
 * typed characters (never the characters), per-pel feedback after a
 * result, and the last server decision.  Enrolled templates and required
 * levels never reach this process, so they cannot be displayed.
 */
export function initialState() {
    return {
        phase: 'connecting',
        userId: null,
        typedCount: 0,
        attention: null,
        meditation: null,
        quantizer: null,
        decision: null,
        lastLevelsAtMs: null,
        error: null,
    };
}
export function applyRecord(state, record) {
    if (record.type === 'LEVELS') {
        return {
            ...state,
            attention: {
                raw: record.attention,
                level: record.attention_level,
                nearEdge: record.attention_near_edge,
            },
            meditation: {
                raw: record.meditation,
                level: record.meditation_level,
                nearEdge: record.meditation_near_edge,
            },
            lastLevelsAtMs: record.t_ms,
        };
    }
    // SESSION_STATE
    const next = {
        ...state,
        phase: record.phase,
        userId: record.user_id ?? state.userId,
        typedCount: record.typed ?? state.typedCount,
        quantizer: record.quantizer ?? state.quantizer,
        error: record.phase === 'error' ? record.reason ?? 'unknown error' : null,
    };
    if (record.phase === 'done' && record.ok !== undefined) {
        next.decision = {
            ok: record.ok,
            reason: record.reason,
            pels: record.pels,
            candidates: record.candidates,
        };
    }
    if (record.phase === 'collecting' && state.phase !== 'collecting') {
        // A fresh session: stale decision and typed count must not linger.
        next.decision = null;
        next.typedCount = record.typed ?? 0;
    }
    return next;
}
/** The masked entry field: one dot per typed character. */
export function maskedEntry(state) {
    return '•'.repeat(state.typedCount);
}
