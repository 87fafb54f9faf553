/** Occupancy map model and pure pixel renderers.
 *
 * The model folds incremental map_delta payloads into a dense log-odds
 * array.  Cell classification matches the server's PGM export exactly:
 * values are wire-quantized already, occupied means > 0.6, free means
 * < -0.6, everything else unknown.  Renderers draw into caller-supplied
 * RGBA buffers so tests can hash frames without a DOM.
 */

export const OCCUPIED_ABOVE = 0.6;
export const FREE_BELOW = -0.6;

export const GRAY_OCCUPIED = 0;
export const GRAY_FREE = 254;
export const GRAY_UNKNOWN = 205;

export interface MapDeltaPayload {
  resolution: number;
  origin: [number, number];
  width: number;
  height: number;
  cells: [number, number, number][];
}

export class MapModel {
  width = 0;
  height = 0;
  resolution = 0.05;
  originX = 0;
  originY = 0;
  cells = new Float64Array(0);
  version = 0;

  applyDelta(payload: MapDeltaPayload): void {
    if (payload.width !== this.width || payload.height !== this.height) {
      this.width = payload.width;
      this.height = payload.height;
      this.cells = new Float64Array(this.width * this.height);
    }
    this.resolution = payload.resolution;
    this.originX = payload.origin[0];
    this.originY = payload.origin[1];
    for (const [ix, iy, value] of payload.cells) {
      this.cells[iy * this.width + ix] = value;
    }
    this.version += 1;
  }

  classify(index: number): number {
    const v = this.cells[index];
    if (v > OCCUPIED_ABOVE) return GRAY_OCCUPIED;
    if (v < FREE_BELOW) return GRAY_FREE;
    return GRAY_UNKNOWN;
  }

  /** Grayscale body in PGM row order (top row = highest y), matching the
   * server's exported file after its header. */
  toPgmBody(): Uint8Array {
    const out = new Uint8Array(this.width * this.height);
    for (let row = 0; row < this.height; row += 1) {
      const srcRow = this.height - 1 - row;
      for (let col = 0; col < this.width; col += 1) {
        out[row * this.width + col] = this.classify(srcRow * this.width + col);
      }
    }
    return out;
  }

  worldToCell(x: number, y: number): [number, number] {
    return [
      Math.floor((x - this.originX) / this.resolution),
      Math.floor((y - this.originY) / this.resolution),
    ];
  }
}

export interface MapOverlays {
  pose?: { x: number; y: number; heading: number };
  scan?: { angle_min: number; angle_increment: number; range_max: number; ranges: number[] };
  plan?: { waypoints: [number, number][] };
  sonar?: { ranges: number[]; range_max: number };
}

function putPixel(buf: Uint8ClampedArray, w: number, h: number, x: number, y: number,
                  r: number, g: number, b: number): void {
  if (x < 0 || y < 0 || x >= w || y >= h) {
    return;
  }
  const o = (y * w + x) * 4;
  buf[o] = r;
  buf[o + 1] = g;
  buf[o + 2] = b;
  buf[o + 3] = 255;
}

/** Paint the occupancy grid and overlays into an RGBA buffer of
 * width*height pixels, one pixel per cell (top row = highest y).  Pure:
 * identical inputs produce identical bytes. */
export function renderMap(
  model: MapModel,
  overlays: MapOverlays,
  buf: Uint8ClampedArray
): void {
  const { width, height } = model;
  for (let row = 0; row < height; row += 1) {
    const srcRow = height - 1 - row;
    for (let col = 0; col < width; col += 1) {
      const gray = model.classify(srcRow * width + col);
      const o = (row * width + col) * 4;
      buf[o] = gray;
      buf[o + 1] = gray;
      buf[o + 2] = gray;
      buf[o + 3] = 255;
    }
  }
  const toPixel = (x: number, y: number): [number, number] => {
    const [cx, cy] = model.worldToCell(x, y);
    return [cx, height - 1 - cy];
  };
  const pose = overlays.pose;
  if (overlays.scan && pose) {
    const { angle_min, angle_increment, range_max, ranges } = overlays.scan;
    for (let i = 0; i < ranges.length; i += 1) {
      if (ranges[i] >= range_max) {
        continue; // no-return sentinel
      }
      const a = pose.heading + angle_min + i * angle_increment;
      const [px, py] = toPixel(
        pose.x + ranges[i] * Math.cos(a),
        pose.y + ranges[i] * Math.sin(a)
      );
      putPixel(buf, width, height, px, py, 220, 40, 40);
    }
  }
  if (overlays.sonar && pose) {
    const { ranges, range_max } = overlays.sonar;
    for (let i = 0; i < ranges.length; i += 1) {
      if (ranges[i] >= range_max) {
        continue;
      }
      const a = pose.heading + (i * Math.PI) / 6;
      const [px, py] = toPixel(
        pose.x + ranges[i] * Math.cos(a),
        pose.y + ranges[i] * Math.sin(a)
      );
      putPixel(buf, width, height, px, py, 250, 160, 30);
    }
  }
  if (overlays.plan) {
    for (const [x, y] of overlays.plan.waypoints) {
      const [px, py] = toPixel(x, y);
      putPixel(buf, width, height, px, py, 60, 120, 240);
    }
  }
  if (pose) {
    const [px, py] = toPixel(pose.x, pose.y);
    for (let dx = -1; dx <= 1; dx += 1) {
      for (let dy = -1; dy <= 1; dy += 1) {
        putPixel(buf, width, height, px + dx, py + dy, 40, 180, 70);
      }
    }
    const [hx, hy] = toPixel(
      pose.x + 4 * model.resolution * Math.cos(pose.heading),
      pose.y + 4 * model.resolution * Math.sin(pose.heading)
    );
    putPixel(buf, width, height, hx, hy, 20, 220, 20);
  }
}
