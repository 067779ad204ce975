import * as fs from "node:fs";
import * as path from "node:path";

import { describe, expect, test } from "vitest";

import {
  TensorFormatError,
  frameIterator,
  fromConditionLayout,
  loadEncoding,
  parseTensor,
  readTensorFile,
  toConditionLayout,
} from "../src";

const FIX = path.join(__dirname, "fixtures");

function fixture(name: string): string {
  const p = path.join(FIX, name);
  if (!fs.existsSync(p)) {
    throw new Error(`missing fixture ${name}; run \`npm run fixtures\` first`);
  }
  return p;
}

describe("loadEncoding", () => {
  test("CLI-produced file is byte-equal to the stored payload", () => {
    const file = fixture("enc64.ften");
    const enc = loadEncoding(file);
    expect(enc.shape).toEqual([64, 64, 60]);

    const raw = fs.readFileSync(file);
    const tensor = parseTensor(raw, file);
    const viewBytes = Buffer.from(enc.data.buffer, 0, enc.data.byteLength);
    expect(viewBytes.equals(tensor.payload)).toBe(true);
    // And against the raw file tail, independent of the parser.
    expect(viewBytes.equals(raw.subarray(raw.length - enc.data.byteLength))).toBe(true);
  });

  test("metadata is surfaced as a plain mapping", () => {
    const enc = loadEncoding(fixture("enc64.ften"));
    expect(enc.metadata["n_samples"]).toBe(20);
    expect(enc.metadata["mode"]).toBe("depth_guided");
    expect(enc.metadata["width"]).toBe(64);
    expect(typeof enc.metadata["assets_digest"]).toBe("string");
  });

  test("zero tensor loads as an all-zero array", () => {
    const enc = loadEncoding(fixture("zeros.ften"));
    expect(enc.shape).toEqual([4, 4, 6]);
    expect(enc.data.every((v) => v === 0)).toBe(true);
  });

  test("truncated file raises an explicit error", () => {
    const raw = fs.readFileSync(fixture("enc64.ften"));
    expect(() => parseTensor(raw.subarray(0, raw.length - 7), "trunc")).toThrow(
      /corrupt payload/
    );
  });

  test("bad magic is rejected", () => {
    const raw = Buffer.from(fs.readFileSync(fixture("enc64.ften")));
    raw.write("NOPE", 0, "latin1");
    expect(() => parseTensor(raw, "bad")).toThrow(TensorFormatError);
    expect(() => parseTensor(raw, "bad")).toThrow(/bad magic/);
  });

  test("dtype mismatch is rejected", () => {
    expect(() => loadEncoding(fixture("f64.ften"))).toThrow(/dtype mismatch/);
  });

  test("wrong rank is rejected", () => {
    const tensor = readTensorFile(fixture("rank2.ften"));
    expect(tensor.dims).toEqual([4, 6]);
    expect(() => loadEncoding(fixture("rank2.ften"))).toThrow(/rank-3/);
  });

  test("container files are not tensor files", () => {
    expect(() => loadEncoding(fixture("assets.fasc"))).toThrow(/bad magic/);
  });
});

describe("toConditionLayout", () => {
  test("hand-checked 2x2x3 case", () => {
    // data[h][w][c] = 100*h + 10*w + c
    const data = new Float32Array([0, 1, 2, 10, 11, 12, 100, 101, 102, 110, 111, 112]);
    const out = toConditionLayout(data, [2, 2, 3]);
    // out[c][h][w]
    expect(Array.from(out)).toEqual([
      0, 10, 100, 110,
      1, 11, 101, 111,
      2, 12, 102, 112,
    ]);
  });

  test("round trip is exact on real data", () => {
    const enc = loadEncoding(fixture("enc64.ften"));
    const [h, w, c] = enc.shape;
    const flipped = toConditionLayout(enc.data, enc.shape);
    expect(flipped.length).toBe(c * h * w);
    const back = fromConditionLayout(flipped, [c, h, w]);
    expect(
      Buffer.from(back.buffer).equals(Buffer.from(enc.data.buffer, 0, enc.data.byteLength))
    ).toBe(true);
  });

  test("shape (64,64,60) maps to (60,64,64)", () => {
    const enc = loadEncoding(fixture("enc64.ften"));
    const out = toConditionLayout(enc.data, enc.shape);
    // Spot-check a handful of moved elements.
    const [h, w, c] = enc.shape;
    for (const [y, x, ch] of [[0, 0, 0], [3, 7, 11], [63, 63, 59], [10, 50, 30]]) {
      expect(out[(ch * h + y) * w + x]).toBe(enc.data[(y * w + x) * c + ch]);
    }
  });

  test("length mismatch is rejected", () => {
    expect(() => toConditionLayout(new Float32Array(5), [1, 2, 3])).toThrow(RangeError);
  });
});

describe("frameIterator", () => {
  test("yields frames in manifest order with uniform shapes", () => {
    const frames = Array.from(frameIterator(fixture("frames.json")));
    expect(frames.map((f) => f.index)).toEqual([0, 1, 2]);
    expect(frames.map((f) => path.basename(f.path))).toEqual([
      "frame0.ften",
      "frame1.ften",
      "frame2.ften",
    ]);
    for (const f of frames) {
      expect(f.encoding.shape).toEqual([16, 16, 6]);
    }
    // Frame 0 is the zero-motion pair, the others carry real flow.
    const peak = (xs: Float32Array) => xs.reduce((m, v) => Math.max(m, Math.abs(v)), 0);
    expect(peak(frames[0].encoding.data)).toBeLessThanOrEqual(1e-6);
    expect(peak(frames[1].encoding.data)).toBeGreaterThan(1e-4);
    expect(frames[1].encoding.data).not.toEqual(frames[2].encoding.data);
  });

  test("shape drift names the offending frame", () => {
    const pull = () => Array.from(frameIterator(fixture("frames_drift.json")));
    expect(pull).toThrow(/frame 1 .*frame_odd\.ften.*drifts/);
  });

  test("missing file names the frame", () => {
    const pull = () => Array.from(frameIterator(fixture("frames_missing.json")));
    expect(pull).toThrow(/frame 1 .*absent\.ften.*not found/);
  });

  test("empty manifest yields an empty stream", () => {
    expect(Array.from(frameIterator(fixture("frames_empty.json")))).toEqual([]);
  });
});
