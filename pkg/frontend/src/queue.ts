/**
 * Single-in-flight request gate.
 *
 * One detect request runs at a time. A submission while busy either
 * queues (latest wins, started after the current one settles) or
 * cancels the in-flight request first, per the visible mode toggle.
 */

export type GateMode = 'queue' | 'cancel';

export type Task<T> = (signal: AbortSignal) => Promise<T>;

export class RequestGate<T> {
  mode: GateMode = 'queue';
  private current: AbortController | null = null;
  private pending: { task: Task<T>; resolve: (v: T) => void; reject: (e: unknown) => void } | null =
    null;

  get busy(): boolean {
    return this.current !== null;
  }

  get queued(): boolean {
    return this.pending !== null;
  }

  submit(task: Task<T>): Promise<T> {
    if (this.current) {
      if (this.mode === 'cancel') {
        this.current.abort();
      } else {
        return new Promise<T>((resolve, reject) => {
          if (this.pending) this.pending.reject(new DOMException('replaced', 'AbortError'));
          this.pending = { task, resolve, reject };
        });
      }
    }
    return this.run(task);
  }

  private run(task: Task<T>): Promise<T> {
    const controller = new AbortController();
    this.current = controller;
    return task(controller.signal).finally(() => {
      if (this.current === controller) this.current = null;
      const next = this.pending;
      if (next && !this.current) {
        this.pending = null;
        this.run(next.task).then(next.resolve, next.reject);
      }
    });
  }
}
