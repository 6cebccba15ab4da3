/** SVG force plot: opposing arrow stacks around the base value.
 *
 * Risk-increasing contributions are red and push right from the base;
 * risk-decreasing ones are blue and pull back to the prediction. Arrow
 * widths are proportional to |phi| (asserted by tests via width ratios).
 */

import type { ExplanationDoc, ForceArrow } from './types.js';

const WIDTH = 680;
const BAR_Y = 34;
const BAR_H = 22;
const PAD = 12;

const RED = '#d13b3b';
const BLUE = '#3b6fd1';

function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function formatValue(value: ForceArrow['raw_value']): string {
  if (typeof value === 'number') {
    return Math.abs(value) >= 100 ? value.toFixed(0) : value.toPrecision(3);
  }
  return String(value);
}

/** Map a probability-scale coordinate to pixels. The scale covers the
 * full span the stacked arrows reach, padded a little. */
function makeScale(doc: ExplanationDoc): (p: number) => number {
  const positive = doc.arrows.filter((a) => a.phi > 0)
    .reduce((s, a) => s + a.phi, 0);
  const peak = doc.base + positive; // rightmost point of the stack
  const low = Math.min(doc.base, doc.prediction, doc.base - 0.02);
  const high = Math.max(peak, doc.prediction, doc.base + 0.02);
  const span = Math.max(high - low, 1e-6);
  return (p: number) => PAD + ((p - low) / span) * (WIDTH - 2 * PAD);
}

export function renderForcePlot(doc: ExplanationDoc): string {
  const x = makeScale(doc);
  const parts: string[] = [];
  const positives = doc.arrows.filter((a) => a.phi > 0);
  const negatives = doc.arrows.filter((a) => a.phi < 0);

  let cursor = doc.base;
  for (const arrow of positives) {
    const x0 = x(cursor);
    cursor += arrow.phi;
    const w = Math.max(x(cursor) - x0, 0);
    parts.push(
      `<rect class="arrow positive" data-feature="${escapeXml(arrow.feature)}" ` +
      `data-phi="${arrow.phi}" x="${x0.toFixed(2)}" y="${BAR_Y}" ` +
      `width="${w.toFixed(2)}" height="${BAR_H}" fill="${RED}">` +
      `<title>${escapeXml(arrow.feature)} = ${escapeXml(formatValue(arrow.raw_value))} ` +
      `(+${arrow.phi.toFixed(4)})</title></rect>`,
    );
  }
  for (const arrow of negatives) {
    const x1 = x(cursor);
    cursor += arrow.phi; // phi < 0 moves left
    const x0 = x(cursor);
    const w = Math.max(x1 - x0, 0);
    parts.push(
      `<rect class="arrow negative" data-feature="${escapeXml(arrow.feature)}" ` +
      `data-phi="${arrow.phi}" x="${x0.toFixed(2)}" y="${BAR_Y}" ` +
      `width="${w.toFixed(2)}" height="${BAR_H}" fill="${BLUE}">` +
      `<title>${escapeXml(arrow.feature)} = ${escapeXml(formatValue(arrow.raw_value))} ` +
      `(${arrow.phi.toFixed(4)})</title></rect>`,
    );
  }

  const baseX = x(doc.base);
  const predX = x(doc.prediction);
  const ticks =
    `<line data-role="base-tick" x1="${baseX.toFixed(2)}" x2="${baseX.toFixed(2)}" ` +
    `y1="${BAR_Y - 14}" y2="${BAR_Y + BAR_H + 14}" stroke="#555" stroke-dasharray="3,2"/>` +
    `<text x="${baseX.toFixed(2)}" y="${BAR_Y - 18}" text-anchor="middle" ` +
    `class="tick-label">base ${doc.base.toFixed(3)}</text>` +
    `<line data-role="prediction-tick" x1="${predX.toFixed(2)}" x2="${predX.toFixed(2)}" ` +
    `y1="${BAR_Y - 6}" y2="${BAR_Y + BAR_H + 20}" stroke="#111"/>` +
    `<text x="${predX.toFixed(2)}" y="${BAR_Y + BAR_H + 32}" text-anchor="middle" ` +
    `class="tick-label">prediction ${doc.prediction.toFixed(3)}</text>`;

  const badge = doc.mode === 'sampled'
    ? `<text data-role="tolerance-badge" x="${WIDTH - PAD}" y="14" text-anchor="end" ` +
      `class="badge">sampled &#177; ${doc.tolerance.toExponential(1)}</text>`
    : '';

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} 100" ` +
    `width="${WIDTH}" height="100" role="img" aria-label="force plot">` +
    `${badge}${parts.join('')}${ticks}</svg>`
  );
}
