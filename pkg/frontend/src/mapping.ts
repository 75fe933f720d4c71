// Invertible mapping between the instrument's y-z region and canvas pixels.
// y runs left-to-right; z runs top-to-bottom (near the sensor = bottom edge).

import type { Roi } from "./protocol.js";

export class CanvasMapping {
  constructor(
    public roi: Roi,
    public width: number,
    public height: number,
  ) {
    if (width <= 0 || height <= 0) throw new Error("empty canvas");
    if (roi.y_max <= roi.y_min || roi.z_max <= roi.z_min) {
      throw new Error("degenerate ROI");
    }
  }

  toPixel(y: number, z: number): [number, number] {
    const px = ((y - this.roi.y_min) / (this.roi.y_max - this.roi.y_min)) * this.width;
    const py = this.height
      - ((z - this.roi.z_min) / (this.roi.z_max - this.roi.z_min)) * this.height;
    return [px, py];
  }

  toWorld(px: number, py: number): [number, number] {
    const y = this.roi.y_min + (px / this.width) * (this.roi.y_max - this.roi.y_min);
    const z = this.roi.z_min
      + ((this.height - py) / this.height) * (this.roi.z_max - this.roi.z_min);
    return [y, z];
  }

  /** Pointer position converted to world coordinates, clamped into the ROI so
   * the client never emits out-of-range hand messages. */
  pointerToHand(px: number, py: number): [number, number] {
    const [y, z] = this.toWorld(px, py);
    return [
      Math.min(Math.max(y, this.roi.y_min), this.roi.y_max),
      Math.min(Math.max(z, this.roi.z_min), this.roi.z_max),
    ];
  }

  contains(y: number, z: number): boolean {
    return y >= this.roi.y_min && y <= this.roi.y_max
      && z >= this.roi.z_min && z <= this.roi.z_max;
  }
}
