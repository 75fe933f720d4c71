// Bounded FIFO decoupling socket receive from rendering; overflow drops the
// oldest entries and counts them so the UI can show backpressure.

export class BoundedQueue<T> {
  private items: T[] = [];
  public dropped = 0;

  constructor(public capacity: number) {
    if (capacity < 1) throw new Error("capacity must be >= 1");
  }

  push(item: T): void {
    this.items.push(item);
    while (this.items.length > this.capacity) {
      this.items.shift();
      this.dropped++;
    }
  }

  drain(): T[] {
    const out = this.items;
    this.items = [];
    return out;
  }

  get length(): number {
    return this.items.length;
  }
}
