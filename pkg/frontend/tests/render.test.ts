import { describe, expect, it } from 'vitest';

import { renderForcePlot } from '../src/force_plot.js';
import { buildFormModel, initialFeatures } from '../src/form.js';
import { renderDecisionPath, renderNeighbors, renderSparkline } from '../src/panels.js';
import type { ExplanationDoc, NeighborSet } from '../src/types.js';
import { MOCK_SCHEMA } from './mock_service.js';

function parse(markup: string): HTMLElement {
  const host = document.createElement('div');
  host.innerHTML = markup;
  return host;
}

function explanation(overrides: Partial<ExplanationDoc> = {}): ExplanationDoc {
  return {
    base: 0.5,
    prediction: 0.62,
    arrows: [
      { feature: 'age', raw_value: 80, phi: 0.1 },
      { feature: 'bun', raw_value: 40, phi: 0.05 },
      { feature: 'service_unit=CSRU', raw_value: 'CCU', phi: -0.03 },
    ],
    mode: 'exact',
    tolerance: 0,
    decision_path: null,
    leaf_probability: null,
    neighbors: null,
    ...overrides,
  };
}

describe('force plot', () => {
  it('draws arrow widths proportional to |phi|', () => {
    const host = parse(renderForcePlot(explanation()));
    const rects = [...host.querySelectorAll('rect.arrow')];
    expect(rects).toHaveLength(3);
    const widths = new Map(rects.map((r) => [
      r.getAttribute('data-feature'),
      Number(r.getAttribute('width')),
    ]));
    const age = widths.get('age')!;
    const bun = widths.get('bun')!;
    const csru = widths.get('service_unit=CSRU')!;
    expect(age / bun).toBeCloseTo(0.1 / 0.05, 1);
    expect(age / csru).toBeCloseTo(0.1 / 0.03, 1);
  });

  it('partitions colors by sign', () => {
    const host = parse(renderForcePlot(explanation()));
    for (const rect of host.querySelectorAll('rect.arrow')) {
      const phi = Number(rect.getAttribute('data-phi'));
      if (phi > 0) expect(rect.classList.contains('positive')).toBe(true);
      else expect(rect.classList.contains('negative')).toBe(true);
    }
  });

  it('zero-phi explanation has no arrows and coincident ticks', () => {
    const host = parse(renderForcePlot(explanation({
      arrows: [], prediction: 0.5,
    })));
    expect(host.querySelectorAll('rect.arrow')).toHaveLength(0);
    const base = host.querySelector('[data-role="base-tick"]')!;
    const pred = host.querySelector('[data-role="prediction-tick"]')!;
    expect(base.getAttribute('x1')).toBe(pred.getAttribute('x1'));
  });

  it('shows the tolerance badge only in sampled mode', () => {
    const exact = parse(renderForcePlot(explanation()));
    expect(exact.querySelector('[data-role="tolerance-badge"]')).toBeNull();
    const sampled = parse(renderForcePlot(explanation({
      mode: 'sampled', tolerance: 0.004,
    })));
    const badge = sampled.querySelector('[data-role="tolerance-badge"]');
    expect(badge).not.toBeNull();
    expect(badge!.textContent).toContain('sampled');
  });
});

describe('form model', () => {
  it('builds a five-way radio group for the service unit', () => {
    const fields = buildFormModel(MOCK_SCHEMA);
    const unit = fields.find((f) => f.name === 'service_unit');
    expect(unit?.kind).toBe('radio');
    expect(unit && 'categories' in unit ? unit.categories : []).toHaveLength(5);
  });

  it('bounds sliders at mean +- 3 sigma', () => {
    const fields = buildFormModel(MOCK_SCHEMA);
    const age = fields.find((f) => f.name === 'age');
    expect(age?.kind).toBe('slider');
    if (age?.kind === 'slider') {
      expect(age.min).toBeCloseTo(63.2 - 3 * 16.2, 0);
      expect(age.max).toBeCloseTo(63.2 + 3 * 16.2, 0);
    }
  });

  it('skips the target and fills initial values', () => {
    const fields = buildFormModel(MOCK_SCHEMA);
    expect(fields.map((f) => f.name)).not.toContain('mortality_28d');
    const features = initialFeatures(fields);
    expect(features['service_unit']).toBe('CCU');
    expect(typeof features['age']).toBe('number');
  });
});

describe('panels', () => {
  it('renders a single-leaf notice for an empty path', () => {
    const host = parse(renderDecisionPath([], 0.3));
    expect(host.querySelector('[data-role="single-leaf"]')).not.toBeNull();
    expect(host.textContent).toContain('single-leaf');
  });

  it('renders breadcrumb rules in order', () => {
    const host = parse(renderDecisionPath([
      { feature: 'bun', comparator: '>', threshold: 19 },
      { feature: 'age', comparator: '<=', threshold: 52.6 },
    ], 0.8));
    const rules = [...host.querySelectorAll('.rule')].map((r) => r.textContent);
    expect(rules[0]).toContain('bun > 19');
    expect(rules[1]).toContain('age <= 52.6');
    expect(host.textContent).toContain('p = 0.800');
  });

  it('renders one table row per neighbor and a matching vote summary', () => {
    const neighbors: NeighborSet = {
      k: 4,
      positive: 3,
      negative: 1,
      vote_summary: '3 positive, 1 negative',
      neighbors: [0, 1, 2, 3].map((i) => ({
        values: { age: 70 + i, bun: 20, service_unit: 'CCU' },
        label: i < 3 ? 1 : 0,
        distance: i * 0.5,
      })),
    };
    const host = parse(renderNeighbors(neighbors));
    expect(host.querySelectorAll('tr.neighbor-row')).toHaveLength(4);
    expect(host.querySelector('[data-role="vote-summary"]')!.textContent)
      .toContain('3 positive, 1 negative');
  });

  it('sparkline reports the point count', () => {
    const markup = renderSparkline([
      { label: 'base', probability: 0.5 },
      { label: 'age=80', probability: 0.7 },
    ]);
    const svg = parse(markup).querySelector('svg')!;
    expect(svg.getAttribute('data-count')).toBe('2');
    expect(parse(markup).querySelectorAll('.history-point')).toHaveLength(2);
  });
});
