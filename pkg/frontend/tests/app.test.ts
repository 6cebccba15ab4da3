import { beforeEach, describe, expect, it } from 'vitest';

import { RiskApi } from '../src/api.js';
import { App } from '../src/main.js';
import { makeMockService, score } from './mock_service.js';

const settle = (ms = 30) => new Promise((resolve) => setTimeout(resolve, ms));

async function startApp(serviceOptions = {}) {
  const service = makeMockService(serviceOptions);
  const root = document.createElement('main');
  document.body.append(root);
  const app = new App({
    root,
    api: new RiskApi('', service.fetch),
    debounceMs: 1,
  });
  await app.start();
  await settle();
  return { app, root, service };
}

function headlineValue(root: HTMLElement): number {
  return Number(root.querySelector('[data-role="risk-value"]')!.textContent);
}

function slider(root: HTMLElement, name: string): HTMLInputElement {
  return root.querySelector<HTMLInputElement>(
    `input[type="range"][name="${name}"]`)!;
}

beforeEach(() => {
  document.body.innerHTML = '';
});

describe('what-if round trip', () => {
  it('loads the schema into a form and shows the base risk', async () => {
    const { root } = await startApp();
    expect(root.querySelectorAll('#feature-form .field')).toHaveLength(3);
    expect(root.querySelectorAll('input[type="radio"]')).toHaveLength(5);
    const expected = score({ service_unit: 'CCU', age: 63.2, bun: 22.4 });
    expect(headlineValue(root)).toBeCloseTo(expected.prediction, 3);
    const history = root.querySelector('#history svg')!;
    expect(history.getAttribute('data-count')).toBe('1');
  });

  it('slider edit submits and the headline equals the force-plot prediction', async () => {
    const { app, root } = await startApp();
    const age = slider(root, 'age');
    age.value = '80';
    age.dispatchEvent(new Event('input'));
    await settle();

    expect(app.session.history).toHaveLength(2);
    expect(app.session.base['age']).toBe(80);
    // headline must match the force plot's prediction exactly
    const predictionLabel = [...root.querySelectorAll('#force-plot text')]
      .map((t) => t.textContent ?? '')
      .find((t) => t.startsWith('prediction'))!;
    expect(Number(predictionLabel.replace('prediction ', '')))
      .toBeCloseTo(headlineValue(root), 3);
    // the number input stays in sync with the slider
    const numberInput = root.querySelector<HTMLInputElement>(
      'input[type="number"][name="age"]')!;
    expect(numberInput.value).toBe('80');
    // delta chip echoes the service's delta
    expect(root.querySelector('[data-role="delta"]')).not.toBeNull();
  });

  it('perturbing bun grows the history and redraws the arrows', async () => {
    const { app, root } = await startApp();
    const before = [...root.querySelectorAll('#force-plot rect.arrow')]
      .map((r) => r.getAttribute('data-phi'));

    const age = slider(root, 'age');
    age.value = '80';
    age.dispatchEvent(new Event('input'));
    await settle();

    const bun = slider(root, 'bun');
    bun.value = '60';
    bun.dispatchEvent(new Event('input'));
    await settle();

    expect(app.session.history).toHaveLength(3);
    expect(app.session.history.at(-1)!.label).toBe('bun=60');
    const history = root.querySelector('#history svg')!;
    expect(history.getAttribute('data-count')).toBe('3');
    const after = [...root.querySelectorAll('#force-plot rect.arrow')]
      .map((r) => r.getAttribute('data-phi'));
    expect(after).not.toEqual(before);
    const expected = score({ service_unit: 'CCU', age: 80, bun: 60 });
    expect(headlineValue(root)).toBeCloseTo(expected.prediction, 3);
  });

  it('discards a stale response that lands after a newer one (delayed mock)', async () => {
    // first what-if delayed 80 ms, second fast: the old response arrives last
    const { app, root } = await startApp({ whatifDelays: [80, 0] });
    const submit = (app as unknown as { submit(): Promise<void> }).submit.bind(app);

    app.session.setField('age', 90);
    const slow = submit();
    app.session.setField('age', 40);
    const fast = submit();
    await Promise.all([fast, slow]);
    await settle(120);

    // only the newer probe applied; the stale 90-year response was dropped
    expect(app.session.history).toHaveLength(2); // base + newest probe
    expect(app.session.base['age']).toBe(40);
    const expected = score({ service_unit: 'CCU', age: 40, bun: 22.4 });
    expect(headlineValue(root)).toBeCloseTo(expected.prediction, 3);
  });
});

describe('controls', () => {
  it('radio change submits the categorical perturbation', async () => {
    const { app, root } = await startApp();
    const csru = root.querySelector<HTMLInputElement>(
      'input[type="radio"][value="CSRU"]')!;
    csru.checked = true;
    csru.dispatchEvent(new Event('change', { bubbles: true }));
    await settle();
    expect(app.session.base['service_unit']).toBe('CSRU');
    const expected = score({ service_unit: 'CSRU', age: 63.2, bun: 22.4 });
    expect(headlineValue(root)).toBeCloseTo(expected.prediction, 3);
  });

  it('switching models re-explains the current profile', async () => {
    const { root, service } = await startApp();
    const explainsBefore = service.calls.filter((c) => c.includes('/explain')).length;
    const select = root.querySelector<HTMLSelectElement>('#model-select')!;
    select.value = 'rf';
    select.dispatchEvent(new Event('change'));
    await settle();
    const explainsAfter = service.calls.filter((c) => c.includes('/explain')).length;
    expect(explainsAfter).toBe(explainsBefore + 1);
  });
});

describe('client-side validity', () => {
  it('clamps free-typed numbers to the schema display range', async () => {
    const { app, root } = await startApp();
    const numberInput = root.querySelector<HTMLInputElement>(
      'input[type="number"][name="age"]')!;
    const max = Number(numberInput.getAttribute('max'));
    numberInput.value = '400';
    numberInput.dispatchEvent(new Event('input'));
    await settle();
    expect(app.session.base['age']).toBe(max);
    expect(numberInput.value).toBe(String(max));
  });
});

describe('error handling', () => {
  it('shows a banner and no form when the schema fetch fails', async () => {
    const { root } = await startApp({ failSchema: true });
    const banner = root.querySelector<HTMLElement>('#error-banner')!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain('cannot reach the model service');
    expect(root.querySelector('#feature-form')).toBeNull();
  });

  it('highlights the offending field on a 422', async () => {
    const { root } = await startApp({
      failPost: {
        status: 422,
        body: { error: 'validation', field: 'bun', detail: "'bun' must be numeric" },
      },
    });
    const banner = root.querySelector<HTMLElement>('#error-banner')!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain('bun');
    const row = root.querySelector('[data-field="bun"]')!;
    expect(row.classList.contains('invalid')).toBe(true);
  });
});
