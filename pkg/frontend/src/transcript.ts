/** Reasoning transcript and failure banner content. */

import type { PipelineResult } from './types';

export function transcriptText(result: PipelineResult): string {
  return result.answer?.reasoning ?? '';
}

export function phraseSummary(result: PipelineResult): string {
  const phrases = result.answer?.phrases ?? [];
  return phrases.length ? `targets: ${phrases.join(', ')}` : 'no targets extracted';
}

/** Banner line naming the failure kind, or null for clean results. */
export function failureBanner(result: PipelineResult): string | null {
  if (!result.failure) return null;
  return `${result.failure.kind}: ${result.failure.detail}`;
}

export function renderTranscript(panel: HTMLElement, result: PipelineResult): void {
  panel.replaceChildren();

  const banner = failureBanner(result);
  if (banner) {
    const el = document.createElement('div');
    el.className = 'failure-banner';
    el.dataset.kind = result.failure!.kind;
    el.textContent = banner;
    panel.appendChild(el);
  }

  const reasoning = document.createElement('p');
  reasoning.className = 'reasoning';
  reasoning.textContent = transcriptText(result);
  panel.appendChild(reasoning);

  const phrases = document.createElement('p');
  phrases.className = 'phrases';
  phrases.textContent = phraseSummary(result);
  panel.appendChild(phrases);
}
