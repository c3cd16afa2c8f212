/** Session history: prior (query, result) pairs, re-runnable with edits. */

import type { PipelineResult } from './types';

export interface HistoryEntry {
  query: string;
  threshold: number | undefined;
  result: PipelineResult;
}

export class SessionHistory {
  private entries: HistoryEntry[] = [];

  push(entry: HistoryEntry): void {
    this.entries.push(entry);
  }

  list(): readonly HistoryEntry[] {
    return this.entries;
  }

  get(index: number): HistoryEntry {
    const entry = this.entries[index];
    if (!entry) throw new RangeError(`no history entry ${index}`);
    return entry;
  }

  get length(): number {
    return this.entries.length;
  }
}
