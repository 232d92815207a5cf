export class SourceUnavailableError extends Error {
  constructor(modelId: string, source: string, detail: string) {
    super(`source weights for "${modelId}" unavailable (${source}): ${detail}`);
    this.name = 'SourceUnavailableError';
  }
}

export class ShapeMismatchError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ShapeMismatchError';
  }
}

export class ParityFailureError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ParityFailureError';
  }
}
