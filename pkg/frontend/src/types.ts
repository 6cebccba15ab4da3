/** Documents exchanged with the icurisk model service (/api/v1). */

export interface DisplayRange {
  mean: number;
  std: number;
}

export interface FeatureDescriptor {
  name: string;
  kind: 'continuous' | 'categorical' | 'binary';
  unit: string;
  categories: string[];
  role: 'input' | 'target';
  display: DisplayRange | null;
}

export interface SchemaDoc {
  features: FeatureDescriptor[];
  target: string;
}

export interface ModelEntry {
  tag: string;
  family: string;
  trained_at: string;
  metrics: Record<string, number> | null;
}

export interface ModelsDoc {
  models: ModelEntry[];
}

export type FeatureValue = number | string;
export type FeatureMap = Record<string, FeatureValue>;

export interface PredictDoc {
  probability: number;
  label: number;
  threshold: number;
}

export interface ForceArrow {
  feature: string;
  raw_value: FeatureValue;
  phi: number;
}

export interface PathStep {
  feature: string;
  comparator: '<=' | '>';
  threshold: number;
}

export interface NeighborRow {
  values: FeatureMap;
  label: number;
  distance: number;
}

export interface NeighborSet {
  neighbors: NeighborRow[];
  k: number;
  positive: number;
  negative: number;
  vote_summary: string;
}

export interface ExplanationDoc {
  base: number;
  prediction: number;
  arrows: ForceArrow[];
  mode: 'exact' | 'sampled' | 'tree';
  tolerance: number;
  decision_path: PathStep[] | null;
  leaf_probability: number | null;
  neighbors: NeighborSet | null;
}

export interface WhatIfResult {
  perturbation: FeatureMap;
  probability: number;
  delta_vs_base: number;
  explanation: ExplanationDoc | null;
}

export interface WhatIfDoc {
  base_probability: number;
  results: WhatIfResult[];
}

export interface ApiErrorBody {
  error: string;
  detail: string;
  field?: string;
}
