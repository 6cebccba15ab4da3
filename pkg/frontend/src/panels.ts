/** Decision-path breadcrumbs, neighbor tables, and the probe-history
 * sparkline. Pure HTML/SVG string builders so they stay easy to test. */

import type { ExplanationDoc, NeighborSet, PathStep } from './types.js';
import type { HistoryPoint } from './state.js';

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;');
}

export function renderDecisionPath(steps: PathStep[] | null,
                                   leafProbability: number | null): string {
  if (steps === null) return '';
  if (steps.length === 0) {
    return '<p class="notice" data-role="single-leaf">single-leaf model: ' +
      'no decision rules to show</p>';
  }
  const crumbs = steps.map((step) =>
    `<span class="rule">${escapeHtml(step.feature)} ` +
    `${escapeHtml(step.comparator)} ${Number(step.threshold.toPrecision(4))}</span>`);
  const leaf = leafProbability === null ? ''
    : ` <span class="leaf">p = ${leafProbability.toFixed(3)}</span>`;
  return `<p class="breadcrumb" data-role="decision-path">` +
    `${crumbs.join(' <span class="sep">&#8594;</span> ')}${leaf}</p>`;
}

const NEIGHBOR_COLUMNS = ['age', 'bun', 'length_of_stay', 'heart_rate',
  'hemoglobin', 'service_unit'];

export function renderNeighbors(set: NeighborSet | null): string {
  if (set === null) return '';
  const header = NEIGHBOR_COLUMNS.map((c) => `<th>${c}</th>`).join('') +
    '<th>label</th><th>distance</th>';
  const rows = set.neighbors.map((n) => {
    const cells = NEIGHBOR_COLUMNS.map((c) => {
      const value = n.values[c];
      const text = typeof value === 'number' ? value.toPrecision(4) : String(value ?? '');
      return `<td>${escapeHtml(text)}</td>`;
    }).join('');
    return `<tr class="neighbor-row">${cells}<td>${n.label}</td>` +
      `<td>${n.distance.toPrecision(3)}</td></tr>`;
  }).join('');
  return (
    `<p class="vote-summary" data-role="vote-summary">` +
    `${set.k} neighbors: ${escapeHtml(set.vote_summary)}</p>` +
    `<table class="neighbors"><thead><tr>${header}</tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderSparkline(history: HistoryPoint[], width = 260,
                                height = 48): string {
  const pad = 4;
  const n = history.length;
  const points = history.map((point, i) => {
    const px = n === 1 ? pad : pad + (i / (n - 1)) * (width - 2 * pad);
    const py = height - pad - point.probability * (height - 2 * pad);
    return `${px.toFixed(1)},${py.toFixed(1)}`;
  });
  const polyline = n >= 2
    ? `<polyline points="${points.join(' ')}" fill="none" stroke="#d13b3b" stroke-width="1.5"/>`
    : '';
  const dots = history.map((point, i) => {
    const coords = points[i]!.split(',');
    return `<circle class="history-point" data-label="${escapeHtml(point.label)}" ` +
      `cx="${coords[0]}" cy="${coords[1]}" r="2.5" fill="#d13b3b">` +
      `<title>${escapeHtml(point.label)}: ${point.probability.toFixed(3)}</title></circle>`;
  }).join('');
  return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" data-count="${n}" role="img" ` +
    `aria-label="probe history">${polyline}${dots}</svg>`;
}

export function renderHeadline(doc: ExplanationDoc): string {
  const pct = (doc.prediction * 100).toFixed(1);
  return `<span class="risk-value" data-role="risk-value">${doc.prediction.toFixed(4)}</span>` +
    `<span class="risk-pct">${pct}% predicted 28-day mortality risk</span>`;
}
