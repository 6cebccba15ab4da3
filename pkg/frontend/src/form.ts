/** Schema-driven form model: sliders for continuous features (bounded by
 * the population display range, mean +- 3 sigma), radio groups for
 * categorical ones. */

import type { FeatureMap, SchemaDoc } from './types.js';

export interface SliderField {
  kind: 'slider';
  name: string;
  unit: string;
  min: number;
  max: number;
  step: number;
  value: number;
}

export interface RadioField {
  kind: 'radio';
  name: string;
  categories: string[];
  value: string;
}

export type FormField = SliderField | RadioField;

function niceStep(span: number): number {
  // about 200 slider stops, snapped to a power-of-ten friendly value
  const raw = span / 200;
  const magnitude = Math.pow(10, Math.floor(Math.log10(raw)));
  const scaled = raw / magnitude;
  const snapped = scaled >= 5 ? 5 : scaled >= 2 ? 2 : 1;
  return snapped * magnitude;
}

function round(value: number, step: number): number {
  return Math.round(value / step) * step;
}

export function buildFormModel(schema: SchemaDoc): FormField[] {
  const fields: FormField[] = [];
  for (const feature of schema.features) {
    if (feature.role !== 'input') continue;
    if (feature.kind === 'categorical') {
      const first = feature.categories[0];
      if (first === undefined) continue;
      fields.push({
        kind: 'radio',
        name: feature.name,
        categories: feature.categories,
        value: first,
      });
    } else {
      const mean = feature.display?.mean ?? 0.5;
      const std = feature.display?.std ?? 0.25;
      const step = niceStep(6 * std);
      fields.push({
        kind: 'slider',
        name: feature.name,
        unit: feature.unit,
        min: round(mean - 3 * std, step),
        max: round(mean + 3 * std, step),
        step,
        value: round(mean, step),
      });
    }
  }
  return fields;
}

export function initialFeatures(fields: FormField[]): FeatureMap {
  const features: FeatureMap = {};
  for (const field of fields) features[field.name] = field.value;
  return features;
}
