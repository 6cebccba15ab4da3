/** DOM wiring for the what-if explorer.
 *
 * One page, no router: a schema-driven profile form on the left, the risk
 * headline, force plot, model-specific evidence, and probe history on the
 * right. Every displayed number comes from the service.
 */

import { ApiError, RiskApi } from './api.js';
import { buildFormModel, initialFeatures, type FormField } from './form.js';
import { renderForcePlot } from './force_plot.js';
import {
  renderDecisionPath,
  renderHeadline,
  renderNeighbors,
  renderSparkline,
} from './panels.js';
import { Session, SubmitQueue } from './state.js';
import type { ExplanationDoc, FeatureValue } from './types.js';

export interface AppOptions {
  root: HTMLElement;
  api: RiskApi;
  debounceMs?: number;
}

export class App {
  readonly session = new Session();
  private readonly api: RiskApi;
  private readonly root: HTMLElement;
  private readonly queue: SubmitQueue;
  private fields: FormField[] = [];

  constructor(options: AppOptions) {
    this.root = options.root;
    this.api = options.api;
    this.queue = new SubmitQueue(() => this.submit(), options.debounceMs ?? 200);
  }

  async start(): Promise<void> {
    this.root.innerHTML = `
      <div class="banner" id="error-banner" hidden></div>
      <div class="columns">
        <section class="panel" id="profile-panel">
          <h2>Patient profile</h2>
          <label class="model-row">model
            <select id="model-select"></select>
          </label>
          <form id="feature-form"></form>
        </section>
        <section class="panel" id="result-panel">
          <h2 id="risk-headline">&#8230;</h2>
          <div id="delta-chip"></div>
          <div id="force-plot"></div>
          <div id="decision-path"></div>
          <div id="neighbors"></div>
          <h3>probe history</h3>
          <div id="history"></div>
        </section>
      </div>`;
    let fields: FormField[];
    try {
      const [schema, models] = await Promise.all([
        this.api.fetchSchema(),
        this.api.fetchModels(),
      ]);
      fields = buildFormModel(schema);
      const select = this.query<HTMLSelectElement>('#model-select');
      for (const entry of models.models) {
        const option = document.createElement('option');
        option.value = entry.tag;
        option.textContent = `${entry.tag} (${entry.family})`;
        select.append(option);
      }
      if (models.models.length === 0) {
        this.showError('no models in the registry; train one and restart the service');
        return;
      }
      this.session.model = models.models[0]!.tag;
      select.value = this.session.model;
      select.addEventListener('change', () => {
        this.session.model = select.value;
        void this.queue.flush();
      });
    } catch (error) {
      this.root.querySelector('#profile-panel')?.remove();
      this.root.querySelector('#result-panel')?.remove();
      this.showError(`cannot reach the model service: ${(error as Error).message}`);
      return;
    }
    this.fields = fields;
    this.session.base = initialFeatures(fields);
    this.renderForm();
    await this.queue.flush();
  }

  private query<T extends Element>(selector: string): T {
    const element = this.root.querySelector<T>(selector);
    if (!element) throw new Error(`missing element ${selector}`);
    return element;
  }

  private showError(message: string, field?: string): void {
    const banner = this.query<HTMLDivElement>('#error-banner');
    banner.hidden = false;
    banner.textContent = message;
    if (field) {
      this.root.querySelector(`[data-field="${field}"]`)?.classList.add('invalid');
    }
  }

  private clearError(): void {
    const banner = this.query<HTMLDivElement>('#error-banner');
    banner.hidden = true;
    banner.textContent = '';
    for (const element of this.root.querySelectorAll('.invalid')) {
      element.classList.remove('invalid');
    }
  }

  private renderForm(): void {
    const form = this.query<HTMLFormElement>('#feature-form');
    form.addEventListener('submit', (event) => event.preventDefault());
    for (const field of this.fields) {
      const row = document.createElement('div');
      row.className = 'field';
      row.dataset.field = field.name;
      if (field.kind === 'radio') {
        const legend = `<span class="field-name">${field.name}</span>`;
        const buttons = field.categories.map((category) => `
          <label class="radio">
            <input type="radio" name="${field.name}" value="${category}"
              ${category === field.value ? 'checked' : ''}/>${category}
          </label>`).join('');
        row.innerHTML = `${legend}<span class="radio-group">${buttons}</span>`;
        row.addEventListener('change', (event) => {
          const input = event.target as HTMLInputElement;
          if (input.name === field.name) this.onEdit(field.name, input.value);
        });
      } else {
        row.innerHTML = `
          <span class="field-name">${field.name}
            <span class="unit">${field.unit}</span></span>
          <input type="range" name="${field.name}" data-role="slider"
            min="${field.min}" max="${field.max}" step="${field.step}"
            value="${field.value}"/>
          <input type="number" name="${field.name}" data-role="number"
            min="${field.min}" max="${field.max}" step="${field.step}"
            value="${field.value}"/>`;
        const slider = row.querySelector<HTMLInputElement>('[data-role="slider"]')!;
        const number = row.querySelector<HTMLInputElement>('[data-role="number"]')!;
        slider.addEventListener('input', () => {
          number.value = slider.value;
          this.onEdit(field.name, Number(slider.value));
        });
        number.addEventListener('input', () => {
          if (number.value === '') return;
          // number boxes accept free text; clamp to the schema display range
          // so every submitted profile stays schema-valid
          const clamped = Math.min(field.max, Math.max(field.min,
                                                       Number(number.value)));
          if (!Number.isFinite(clamped)) return;
          number.value = String(clamped);
          slider.value = String(clamped);
          this.onEdit(field.name, clamped);
        });
      }
      form.append(row);
    }
  }

  private onEdit(name: string, value: FeatureValue): void {
    this.session.setField(name, value);
    this.queue.request();
  }

  private async submit(): Promise<void> {
    if (!this.session.model) return;
    const probe = this.session.captureProbe();
    const hasPerturbation = Object.keys(probe.pending).length > 0;
    try {
      let explanation: ExplanationDoc;
      let probability: number;
      let delta: number | null = null;
      if (hasPerturbation) {
        const doc = await this.api.whatif(this.session.model, this.session.base,
                                          [probe.pending], true);
        const result = doc.results[0];
        if (!result || !result.explanation) {
          throw new Error('service returned no explanation for the perturbation');
        }
        explanation = result.explanation;
        probability = result.probability;
        delta = result.delta_vs_base;
      } else {
        explanation = await this.api.explain(this.session.model, probe.features);
        probability = explanation.prediction;
      }
      if (!this.session.applyProbe(probe, probability, explanation)) return;
      this.clearError();
      this.renderResult(explanation, delta);
    } catch (error) {
      if (error instanceof ApiError) {
        this.showError(error.body.detail, error.field);
      } else {
        this.showError((error as Error).message);
      }
    }
  }

  private renderResult(explanation: ExplanationDoc, delta: number | null): void {
    this.query('#risk-headline').innerHTML = renderHeadline(explanation);
    const chip = this.query('#delta-chip');
    if (delta === null) {
      chip.innerHTML = '';
    } else {
      const sign = delta >= 0 ? '+' : '';
      chip.innerHTML = `<span class="delta ${delta >= 0 ? 'up' : 'down'}" ` +
        `data-role="delta">${sign}${delta.toFixed(4)} vs previous base</span>`;
    }
    this.query('#force-plot').innerHTML = renderForcePlot(explanation);
    this.query('#decision-path').innerHTML =
      renderDecisionPath(explanation.decision_path, explanation.leaf_probability);
    this.query('#neighbors').innerHTML = renderNeighbors(explanation.neighbors);
    this.query('#history').innerHTML = renderSparkline(this.session.history);
  }
}

declare global {
  interface Window {
    icuriskApp?: App;
  }
}

const autostartRoot = typeof document !== 'undefined'
  ? document.querySelector<HTMLElement>('#app[data-autostart="true"]')
  : null;
if (autostartRoot) {
  const app = new App({ root: autostartRoot, api: new RiskApi('') });
  window.icuriskApp = app;
  void app.start();
}
