/** Flow-encoding tensors: shape-validated views over tensor files. */

import { TensorFormatError, asFloat32, readTensorFile } from "./tensorfile";

export interface FlowEncoding {
  /** Row-major H x W x 3N values, bit-identical to the file payload. */
  data: Float32Array;
  /** [height, width, channels]; channels is 3 * samples-per-pixel. */
  shape: [number, number, number];
  metadata: Record<string, unknown>;
}

export function loadEncoding(path: string): FlowEncoding {
  const tensor = readTensorFile(path);
  if (tensor.dims.length !== 3) {
    throw new TensorFormatError(
      `${path}: expected a rank-3 flow tensor, got rank ${tensor.dims.length}`
    );
  }
  const [h, w, c] = tensor.dims;
  if (c % 3 !== 0) {
    throw new TensorFormatError(`${path}: channel count ${c} is not a multiple of 3`);
  }
  return {
    data: asFloat32(tensor, path),
    shape: [h, w, c],
    metadata: tensor.metadata,
  };
}
