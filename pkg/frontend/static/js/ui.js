/**
 * Browser wiring: subscribe to the relay's event stream, render state,
 * forward keys, submit, and (demo mode) steer the synthetic signal.
 */
import { applyRecord, initialState } from './console.js';
import { decodeInbound } from './records.js';
import { renderDecision, renderEntry, renderGauge, renderPhase } from './render.js';
let state = initialState();
function el(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
function render() {
    const edges = state.quantizer?.band_edges ?? null;
    const margin = state.quantizer?.hysteresis_margin ?? null;
    el('gauges').innerHTML =
        renderGauge('attention', state.attention, edges, margin) +
            renderGauge('meditation', state.meditation, edges, margin);
    el('phase').innerHTML = renderPhase(state);
    el('entry').innerHTML = renderEntry(state);
    el('decision').innerHTML = renderDecision(state);
}
async function send(record) {
    await fetch('/send', {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(record),
    });
}
function subscribe() {
    const source = new EventSource('/events');
    source.onmessage = (event) => {
        try {
            state = applyRecord(state, decodeInbound(event.data));
        }
        catch (err) {
            console.error(err);
            return;
        }
        render();
    };
    source.onerror = () => {
        state = { ...state, phase: 'error', error: 'event stream lost' };
        render();
    };
}
function wireInput() {
    const input = el('password');
    input.addEventListener('keydown', (event) => {
        if (event.key === 'Enter') {
            void send({ type: 'FINISH' });
            input.value = '';
            event.preventDefault();
            return;
        }
        if (event.key.length === 1 && !event.ctrlKey && !event.metaKey) {
            void send({ type: 'KEY', ch: event.key });
        }
    });
    el('submit').addEventListener('click', () => {
        void send({ type: 'FINISH' });
        input.value = '';
    });
    const attention = el('steer-attention');
    const meditation = el('steer-meditation');
    const steer = () => void send({
        type: 'STEER',
        attention: Number(attention.value),
        meditation: Number(meditation.value),
    });
    attention.addEventListener('input', steer);
    meditation.addEventListener('input', steer);
}
subscribe();
wireInput();
render();
