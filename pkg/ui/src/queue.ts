/**
 * Client-side submission queue: edits are submitted one at a time, in
 * order; later submissions wait for the one in flight.
 */

export class SubmitQueue {
  private tail: Promise<unknown> = Promise.resolve();
  private depth = 0;

  get pending(): number {
    return this.depth;
  }

  enqueue<T>(task: () => Promise<T>): Promise<T> {
    this.depth += 1;
    const run = this.tail.then(async () => {
      try {
        return await task();
      } finally {
        this.depth -= 1;
      }
    });
    this.tail = run.catch(() => undefined);
    return run;
  }
}
