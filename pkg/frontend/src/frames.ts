/**
 * Ordered iteration over a sequence of flow-encoding frames.
 *
 * A manifest is a JSON array of tensor-file paths, resolved relative to the
 * manifest's own directory.  Frames are yielded in manifest order and must
 * all share one shape; the first deviating frame is named in the error.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { FlowEncoding, loadEncoding } from "./encoding";

export interface Frame {
  index: number;
  path: string;
  encoding: FlowEncoding;
}

export function readManifest(manifestPath: string): string[] {
  const doc = JSON.parse(fs.readFileSync(manifestPath, "utf-8"));
  if (!Array.isArray(doc) || doc.some((entry) => typeof entry !== "string")) {
    throw new TypeError(`${manifestPath}: manifest must be a JSON array of paths`);
  }
  const base = path.dirname(manifestPath);
  return doc.map((entry) => path.resolve(base, entry));
}

export function* frameIterator(manifestPath: string): Generator<Frame> {
  const paths = readManifest(manifestPath);
  let shape: [number, number, number] | null = null;
  for (let index = 0; index < paths.length; index++) {
    const framePath = paths[index];
    if (!fs.existsSync(framePath)) {
      throw new Error(`frame ${index} (${framePath}): file not found`);
    }
    const encoding = loadEncoding(framePath);
    if (shape === null) {
      shape = encoding.shape;
    } else if (
      shape[0] !== encoding.shape[0] ||
      shape[1] !== encoding.shape[1] ||
      shape[2] !== encoding.shape[2]
    ) {
      throw new Error(
        `frame ${index} (${framePath}): shape [${encoding.shape}] drifts from [${shape}]`
      );
    }
    yield { index, path: framePath, encoding };
  }
}
