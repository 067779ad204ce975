/**
 * Reader for the binary tensor format emitted by the flowfield CLI.
 *
 * Layout (all integers little-endian):
 *   magic "FTEN" | version u16 | rank u16 | dims u64*rank | dtype u16
 *   | metadata length u32 | metadata JSON (UTF-8) | row-major payload
 *
 * The bridge is a consumer only: payload bytes are surfaced exactly as
 * stored, with no arithmetic applied.
 */

import * as fs from "node:fs";

export class TensorFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TensorFormatError";
  }
}

export const TENSOR_MAGIC = "FTEN";
export const TENSOR_VERSION = 1;

/** dtype codes of the wire format; the bridge materializes float32 only. */
export const DTYPE_FLOAT32 = 1;

const MAX_DIM = 2 ** 48;

export interface TensorFile {
  dims: number[];
  dtypeCode: number;
  metadata: Record<string, unknown>;
  /** Exact payload bytes as stored in the file. */
  payload: Buffer;
  /** Byte offset of the payload within the file. */
  payloadOffset: number;
}

class Cursor {
  offset = 0;
  constructor(private readonly buf: Buffer, private readonly path: string) {}

  take(n: number): Buffer {
    if (this.offset + n > this.buf.length) {
      throw new TensorFormatError(`${this.path}: corrupt payload (truncated)`);
    }
    const out = this.buf.subarray(this.offset, this.offset + n);
    this.offset += n;
    return out;
  }

  u16(): number {
    return this.take(2).readUInt16LE(0);
  }

  u32(): number {
    return this.take(4).readUInt32LE(0);
  }

  u64(): number {
    const value = this.take(8).readBigUInt64LE(0);
    if (value > BigInt(MAX_DIM)) {
      throw new TensorFormatError(`${this.path}: dimension overflow (${value})`);
    }
    return Number(value);
  }
}

export function parseTensor(buf: Buffer, path = "<buffer>"): TensorFile {
  const cur = new Cursor(buf, path);
  if (cur.take(4).toString("latin1") !== TENSOR_MAGIC) {
    throw new TensorFormatError(`${path}: bad magic (not a tensor file)`);
  }
  const version = cur.u16();
  if (version !== TENSOR_VERSION) {
    throw new TensorFormatError(`${path}: unsupported tensor format version ${version}`);
  }
  const rank = cur.u16();
  const dims: number[] = [];
  for (let i = 0; i < rank; i++) {
    dims.push(cur.u64());
  }
  const dtypeCode = cur.u16();
  const metaLength = cur.u32();
  let metadata: Record<string, unknown> = {};
  if (metaLength > 0) {
    const metaBytes = cur.take(metaLength).toString("utf-8");
    try {
      metadata = JSON.parse(metaBytes) as Record<string, unknown>;
    } catch (exc) {
      throw new TensorFormatError(`${path}: corrupt metadata block (${exc})`);
    }
  }
  const count = dims.reduce((acc, d) => acc * d, 1);
  if (!Number.isSafeInteger(count)) {
    throw new TensorFormatError(`${path}: dimension overflow in [${dims}]`);
  }
  const itemSize = dtypeCode === DTYPE_FLOAT32 ? 4 : itemSizeFor(dtypeCode, path);
  const payloadOffset = cur.offset;
  const payload = cur.take(count * itemSize);
  if (cur.offset !== buf.length) {
    throw new TensorFormatError(`${path}: corrupt payload (trailing bytes)`);
  }
  return { dims, dtypeCode, metadata, payload, payloadOffset };
}

function itemSizeFor(code: number, path: string): number {
  const sizes: Record<number, number> = { 1: 4, 2: 8, 3: 4, 4: 8 };
  const size = sizes[code];
  if (size === undefined) {
    throw new TensorFormatError(`${path}: unknown dtype code ${code}`);
  }
  return size;
}

export function readTensorFile(path: string): TensorFile {
  return parseTensor(fs.readFileSync(path), path);
}

/** Copy payload bytes into an aligned Float32Array (values bit-identical). */
export function asFloat32(tensor: TensorFile, path = "<buffer>"): Float32Array {
  if (tensor.dtypeCode !== DTYPE_FLOAT32) {
    throw new TensorFormatError(
      `${path}: dtype mismatch (expected float32 code ${DTYPE_FLOAT32}, got ${tensor.dtypeCode})`
    );
  }
  const aligned = new ArrayBuffer(tensor.payload.length);
  new Uint8Array(aligned).set(tensor.payload);
  return new Float32Array(aligned);
}
