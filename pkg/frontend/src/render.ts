/**
 * DOM-free rendering of console state to HTML strings.
 *
 * Kept free of browser APIs so the scripted end-to-end test can assert on
 * exactly what a browser session would show.
 */

import type { ConsoleState, GaugeReading } from './console.js';
import { bandSegments, hysteresisZones, valuePercent } from './gauge.js';

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderGauge(
  name: string,
  reading: GaugeReading | null,
  edges: number[] | null,
  margin: number | null,
): string {
  const parts: string[] = [`<div class="gauge" id="gauge-${name}">`];
  parts.push(`<span class="gauge-name">${name}</span>`);
  if (edges && margin !== null) {
    for (const seg of bandSegments(edges)) {
      parts.push(
        `<span class="band band-${seg.label}" style="left:${seg.from}%;width:${seg.to - seg.from}%">${seg.label}</span>`,
      );
    }
    for (const zone of hysteresisZones(edges, margin)) {
      parts.push(
        `<span class="hysteresis" style="left:${zone.from}%;width:${zone.to - zone.from}%"></span>`,
      );
    }
  }
  if (reading) {
    const edge = reading.nearEdge ? ' near-edge' : '';
    parts.push(
      `<span class="needle${edge}" style="left:${valuePercent(reading.raw)}%"></span>`,
    );
    parts.push(
      `<span class="reading">${reading.raw} (${reading.level})</span>`,
    );
  } else {
    parts.push('<span class="reading">waiting for signal</span>');
  }
  parts.push('</div>');
  return parts.join('');
}

export function renderDecision(state: ConsoleState): string {
  if (state.phase === 'error') {
    return `<div class="decision error">Error: ${escapeHtml(state.error ?? '')}</div>`;
  }
  if (state.phase !== 'done' || !state.decision) {
    return '<div class="decision pending"></div>';
  }
  const d = state.decision;
  const label = d.ok ? 'Accept' : 'Reject';
  const cls = d.ok ? 'accept' : 'reject';
  const feedback =
    d.pels !== undefined
      ? ` <span class="feedback">(${d.pels} pels entered, ${d.candidates ?? 0} candidate${d.candidates === 1 ? '' : 's'})</span>`
      : '';
  const reason = !d.ok && d.reason ? ` <span class="reason">${escapeHtml(d.reason)}</span>` : '';
  return `<div class="decision ${cls}">${label}${feedback}${reason}</div>`;
}

export function renderEntry(state: ConsoleState): string {
  const dots = '•'.repeat(state.typedCount);
  return `<div class="entry" aria-label="${state.typedCount} characters typed">${dots}</div>`;
}

export function renderPhase(state: ConsoleState): string {
  const user = state.userId ? ` for ${escapeHtml(state.userId)}` : '';
  return `<div class="phase">${state.phase}${user}</div>`;
}
