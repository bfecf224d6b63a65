/**
 * Pure geometry for the level gauges.
 *
 * A gauge is a horizontal bar from 0 to 100 split into five bands by the
 * quantizer edges, with shaded hysteresis zones straddling each edge so
 * the user can see when their value is inside a sticky region and learn
 * to hold a band cleanly.
 */
const BAND_LABELS = ['S', 'L', 'N', 'R', 'H'];
export function bandSegments(edges) {
    if (edges.length !== 4)
        throw new Error('expected four band edges');
    const bounds = [0, ...edges, 100];
    return BAND_LABELS.map((label, i) => ({
        label,
        from: bounds[i],
        to: bounds[i + 1],
    }));
}
export function hysteresisZones(edges, margin) {
    return edges.map((e) => ({
        from: Math.max(0, e - margin),
        to: Math.min(100, e + margin),
    }));
}
/** Percentage position of a raw value along the gauge. */
export function valuePercent(raw) {
    return Math.max(0, Math.min(100, raw));
}
export function bandOf(raw, edges) {
    let i = 0;
    while (i < edges.length && raw >= edges[i])
        i += 1;
    return BAND_LABELS[i];
}
export function inHysteresisZone(raw, edges, margin) {
    return edges.some((e) => Math.abs(raw - e) <= margin);
}
