/** Thin typed client for the model service. All numbers the UI shows come
 * from these responses; the client never computes probabilities itself. */

import type {
  ApiErrorBody,
  ExplanationDoc,
  FeatureMap,
  ModelsDoc,
  PredictDoc,
  SchemaDoc,
  WhatIfDoc,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody,
  ) {
    super(body.detail);
  }

  get field(): string | undefined {
    return this.body.field;
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let body: ApiErrorBody = { error: 'http', detail: `status ${response.status}` };
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body; keep the fallback
  }
  return new ApiError(response.status, body);
}

export class RiskApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  fetchSchema(): Promise<SchemaDoc> {
    return this.get<SchemaDoc>('/api/v1/schema');
  }

  fetchModels(): Promise<ModelsDoc> {
    return this.get<ModelsDoc>('/api/v1/models');
  }

  predict(model: string, features: FeatureMap): Promise<PredictDoc> {
    return this.post<PredictDoc>('/api/v1/predict', { model, features });
  }

  explain(model: string, features: FeatureMap): Promise<ExplanationDoc> {
    return this.post<ExplanationDoc>('/api/v1/explain', { model, features });
  }

  whatif(model: string, features: FeatureMap, perturbations: FeatureMap[],
         explain: boolean): Promise<WhatIfDoc> {
    return this.post<WhatIfDoc>('/api/v1/whatif', {
      model,
      features,
      perturbations,
      explain,
    });
  }
}
