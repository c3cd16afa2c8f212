/** DOM wiring for the operator console. */

import { ApiError, MAX_UPLOAD_BYTES, OversizeError, checkUploadSize, detect } from './api';
import { SessionHistory } from './history';
import { renderOverlay } from './overlay';
import { RequestGate } from './queue';
import { renderTranscript } from './transcript';
import type { PipelineResult } from './types';

const BASE_URL = import.meta.env?.VITE_API_BASE ?? 'http://127.0.0.1:8008';

export function mountApp(root: HTMLElement): void {
  root.innerHTML = `
    <header><h1>reasondet console</h1></header>
    <main>
      <section class="controls">
        <input type="file" id="image-file" accept="image/*" />
        <textarea id="query" rows="2" placeholder="What are you looking for?"></textarea>
        <label>threshold <input type="range" id="threshold" min="0.05" max="0.95" step="0.05" value="0.35" />
          <span id="threshold-value">0.35</span></label>
        <label><input type="checkbox" id="cancel-mode" /> cancel in-flight request on new submit</label>
        <button id="submit">detect</button>
        <div id="status" role="status"></div>
      </section>
      <section class="viewer">
        <div id="stage" style="position: relative; display: inline-block">
          <img id="display" alt="" />
        </div>
      </section>
      <section id="transcript" class="transcript"></section>
      <section class="history"><h2>history</h2><ol id="history-list"></ol></section>
    </main>
  `;

  const fileInput = root.querySelector<HTMLInputElement>('#image-file')!;
  const queryBox = root.querySelector<HTMLTextAreaElement>('#query')!;
  const slider = root.querySelector<HTMLInputElement>('#threshold')!;
  const sliderValue = root.querySelector<HTMLSpanElement>('#threshold-value')!;
  const cancelToggle = root.querySelector<HTMLInputElement>('#cancel-mode')!;
  const submit = root.querySelector<HTMLButtonElement>('#submit')!;
  const status = root.querySelector<HTMLDivElement>('#status')!;
  const stage = root.querySelector<HTMLDivElement>('#stage')!;
  const display = root.querySelector<HTMLImageElement>('#display')!;
  const transcript = root.querySelector<HTMLElement>('#transcript')!;
  const historyList = root.querySelector<HTMLOListElement>('#history-list')!;

  const gate = new RequestGate<PipelineResult>();
  const history = new SessionHistory();

  slider.addEventListener('input', () => {
    sliderValue.textContent = slider.value;
  });
  cancelToggle.addEventListener('change', () => {
    gate.mode = cancelToggle.checked ? 'cancel' : 'queue';
  });

  fileInput.addEventListener('change', () => {
    const file = fileInput.files?.[0];
    if (!file) return;
    try {
      checkUploadSize(file.size);
      status.textContent = '';
    } catch (e) {
      if (e instanceof OversizeError) {
        status.textContent = e.message;
        fileInput.value = '';
        return;
      }
      throw e;
    }
    display.src = URL.createObjectURL(file);
  });

  function showResult(result: PipelineResult): void {
    renderTranscript(transcript, result);
    const scale =
      result.image.width_px && display.clientWidth > 0
        ? display.clientWidth / result.image.width_px
        : 1;
    renderOverlay(stage, result, scale);
  }

  function renderHistory(): void {
    historyList.replaceChildren();
    history.list().forEach((entry, i) => {
      const item = document.createElement('li');
      const button = document.createElement('button');
      button.textContent = `${entry.query} (${entry.result.detections.length} boxes)`;
      button.addEventListener('click', () => {
        // Refill for editing; the operator re-submits explicitly.
        queryBox.value = entry.query;
        if (entry.threshold !== undefined) {
          slider.value = String(entry.threshold);
          sliderValue.textContent = slider.value;
        }
        showResult(entry.result);
      });
      item.appendChild(button);
      historyList.appendChild(item);
    });
  }

  submit.addEventListener('click', () => {
    const file = fileInput.files?.[0];
    const query = queryBox.value.trim();
    if (!file || !query) {
      status.textContent = 'pick an image and type a query first';
      return;
    }
    const threshold = Number(slider.value);
    status.textContent = gate.busy ? `request ${gate.mode}d…` : 'running…';
    gate
      .submit((signal) =>
        detect(BASE_URL, { query, threshold, image: { name: file.name, data: file } }, signal),
      )
      .then((result) => {
        status.textContent = '';
        history.push({ query, threshold, result });
        renderHistory();
        showResult(result);
      })
      .catch((e) => {
        if (e instanceof DOMException && e.name === 'AbortError') return;
        status.textContent = e instanceof ApiError ? `error in ${e.body.stage}: ${e.body.detail}` : String(e);
      });
  });
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  mountApp(document.getElementById('app')!);
}

export { MAX_UPLOAD_BYTES };
