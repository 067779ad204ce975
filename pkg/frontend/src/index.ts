export {
  TensorFormatError,
  TensorFile,
  parseTensor,
  readTensorFile,
  asFloat32,
} from "./tensorfile";
export { FlowEncoding, loadEncoding } from "./encoding";
export { Shape3, toConditionLayout, fromConditionLayout } from "./layout";
export { Frame, frameIterator, readManifest } from "./frames";
