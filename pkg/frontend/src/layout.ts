/**
 * Channel layout conversion: conditioning networks consume channel-first
 * tensors, while the files store channels last.  Both directions are pure
 * element moves, so a round trip reproduces the input exactly.
 */

export type Shape3 = [number, number, number];

function checkShape(data: Float32Array, shape: Shape3, name: string): void {
  const [a, b, c] = shape;
  if (shape.length !== 3 || a * b * c !== data.length) {
    throw new RangeError(`${name}: shape [${shape}] does not match length ${data.length}`);
  }
}

/** H x W x C (channels last) -> C x H x W (channels first). */
export function toConditionLayout(data: Float32Array, shape: Shape3): Float32Array {
  checkShape(data, shape, "toConditionLayout");
  const [h, w, c] = shape;
  const out = new Float32Array(data.length);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const base = (y * w + x) * c;
      for (let ch = 0; ch < c; ch++) {
        out[(ch * h + y) * w + x] = data[base + ch];
      }
    }
  }
  return out;
}

/** C x H x W (channels first) -> H x W x C (channels last); exact inverse. */
export function fromConditionLayout(data: Float32Array, shape: Shape3): Float32Array {
  checkShape(data, shape, "fromConditionLayout");
  const [c, h, w] = shape;
  const out = new Float32Array(data.length);
  for (let ch = 0; ch < c; ch++) {
    for (let y = 0; y < h; y++) {
      const base = (ch * h + y) * w;
      for (let x = 0; x < w; x++) {
        out[(y * w + x) * c + ch] = data[base + x];
      }
    }
  }
  return out;
}
