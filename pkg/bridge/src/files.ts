/**
 * File protocol shared with the evaluator.
 *
 * Datasets arrive as a directory: edges.csv (header `u,v,t`), meta.json
 * ({node_count, time_kind, granularity}), optional split.json, and the
 * sampled training examples train_positives.csv / train_negatives.csv.
 * Queries are edge CSVs; predictions leave as `u,v,t,score` with scores
 * printed to exactly six decimal places.
 */

import * as fs from "node:fs";
import * as path from "node:path";

export class InputError extends Error {}

export interface Triple {
  u: number;
  v: number;
  t: number;
}

export interface Dataset {
  nodeCount: number;
  timeKind: string;
  edges: Triple[];
  trainEnd: number | null; // null: no split file, train on everything
  valEnd: number | null;
  positives: Triple[];
  negatives: Triple[];
}

function readText(filePath: string): string {
  if (!fs.existsSync(filePath)) {
    throw new InputError(`missing file: ${filePath}`);
  }
  return fs.readFileSync(filePath, "ascii");
}

export function parseEdgeCsv(text: string, nodeCount: number, where: string): Triple[] {
  const lines = text.split("\n");
  if (lines.length > 0 && lines[lines.length - 1] === "") lines.pop();
  if (lines.length === 0 || lines[0] !== "u,v,t") {
    throw new InputError(`${where}: expected header u,v,t`);
  }
  const rows: Triple[] = [];
  for (let i = 1; i < lines.length; i++) {
    const fields = lines[i].split(",");
    if (fields.length !== 3 || fields.some((f) => !/^\d+$/.test(f))) {
      throw new InputError(`${where}: malformed row at line ${i + 1}`);
    }
    const [u, v, t] = fields.map(Number);
    if (u === v) throw new InputError(`${where}: self-loop at line ${i + 1}`);
    if (u >= nodeCount || v >= nodeCount) {
      throw new InputError(`${where}: node id out of range at line ${i + 1}`);
    }
    rows.push({ u, v, t });
  }
  return rows;
}

export function readDataset(dir: string): Dataset {
  const metaRaw = readText(path.join(dir, "meta.json"));
  let meta: Record<string, unknown>;
  try {
    meta = JSON.parse(metaRaw);
  } catch (err) {
    throw new InputError(`invalid meta.json: ${err}`);
  }
  const nodeCount = meta["node_count"];
  const timeKind = meta["time_kind"];
  if (typeof nodeCount !== "number" || nodeCount < 1) {
    throw new InputError("meta.json: node_count must be a positive integer");
  }
  if (timeKind !== "discrete" && timeKind !== "continuous") {
    throw new InputError("meta.json: time_kind must be discrete or continuous");
  }
  const edges = parseEdgeCsv(
    readText(path.join(dir, "edges.csv")), nodeCount, "edges.csv",
  );

  let trainEnd: number | null = null;
  let valEnd: number | null = null;
  const splitPath = path.join(dir, "split.json");
  if (fs.existsSync(splitPath)) {
    const split = JSON.parse(readText(splitPath));
    trainEnd = Number(split["train_end"]);
    valEnd = Number(split["val_end"]);
    if (!Number.isFinite(trainEnd) || !Number.isFinite(valEnd)) {
      throw new InputError("split.json: train_end and val_end must be numbers");
    }
  }

  const positives = parseEdgeCsv(
    readText(path.join(dir, "train_positives.csv")), nodeCount,
    "train_positives.csv",
  );
  const negatives = parseEdgeCsv(
    readText(path.join(dir, "train_negatives.csv")), nodeCount,
    "train_negatives.csv",
  );
  if (positives.length === 0 || negatives.length === 0) {
    throw new InputError("training examples must include positives and negatives");
  }
  return { nodeCount, timeKind, edges, trainEnd, valEnd, positives, negatives };
}

export function readQueries(filePath: string, nodeCount: number): Triple[] {
  return parseEdgeCsv(readText(filePath), nodeCount, path.basename(filePath));
}

export function writePredictions(
  filePath: string, queries: Triple[], scores: Float64Array,
): void {
  const rows = ["u,v,t,score"];
  for (let i = 0; i < queries.length; i++) {
    const q = queries[i];
    rows.push(`${q.u},${q.v},${q.t},${scores[i].toFixed(6)}`);
  }
  rows.push("");
  fs.writeFileSync(filePath, rows.join("\n"), "ascii");
}

export function writeSidecar(filePath: string, payload: object): void {
  fs.writeFileSync(filePath, JSON.stringify(payload, null, 2) + "\n", "ascii");
}
