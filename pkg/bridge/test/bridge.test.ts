/**
 * Bridge test suite.
 *
 * Integration tests drive the real protocol end to end: the evaluator CLI
 * (`tgdiag`, installed from the sibling package) generates a persistence
 * toy and validates every prediction file the bridge emits.
 */

import assert from "node:assert/strict";
import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";
import { before, describe, test } from "node:test";

import { deriveSeed, splitmix64 } from "../src/rng.js";
import { parseEdgeCsv, InputError } from "../src/files.js";
import { MODEL_NAMES } from "../src/configs.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const BRIDGE_MAIN = path.join(here, "..", "src", "main.js");

const work = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-test-"));
const runDir = path.join(work, "run");
const stageDir = path.join(runDir, "stages", "test");
const queriesPath = path.join(stageDir, "queries.csv");

function tgdiag(...args: string[]) {
  const result = spawnSync("tgdiag", args, { encoding: "utf-8" });
  if (result.error) {
    throw new Error(
      "tgdiag CLI not found; install the evaluator package first " +
      `(${result.error})`,
    );
  }
  return result;
}

function bridge(...args: string[]) {
  return spawnSync(process.execPath, [BRIDGE_MAIN, ...args],
                   { encoding: "utf-8" });
}

function persistenceManifest(outDir: string, models: object[]): string {
  const manifest = {
    schema_version: 1,
    property: "persistence",
    seed: 20250808,
    dataset: {
      kind: "persistence",
      source: { kind: "recency", nodes: 20, edges_per_step: 8, steps: 10 },
      snapshot_t: 1,
      horizon: 12,
    },
    models,
    output_dir: outDir,
  };
  const manifestPath = path.join(work, `manifest-${path.basename(outDir)}.json`);
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2));
  return manifestPath;
}

before(() => {
  // a cheap baseline run materializes the stage directory and queries
  const manifest = persistenceManifest(runDir, [
    { kind: "baseline", name: "edgebank" },
  ]);
  const result = tgdiag("run", manifest);
  assert.equal(result.status, 0, result.stderr);
  assert.ok(fs.existsSync(queriesPath));
});

describe("seed derivation matches the evaluator", () => {
  test("pinned splitmix64 vectors", () => {
    assert.equal(splitmix64(0n), 0xb604d07639442ce8n);
    assert.equal(splitmix64(1n), 0x73bc0947f53c6fe1n);
  });

  test("pinned derive vectors", () => {
    assert.equal(deriveSeed(42n, 7n), 0x6ba00701108fd3ben);
    assert.equal(deriveSeed(42n, 7n, 3n), 0x6e1e70e5ce88c79bn);
  });
});

describe("file protocol", () => {
  test("rejects malformed edge rows", () => {
    assert.throws(() => parseEdgeCsv("u,v,t\n0,0,1\n", 4, "x"), InputError);
    assert.throws(() => parseEdgeCsv("u,v\n", 4, "x"), InputError);
    assert.throws(() => parseEdgeCsv("u,v,t\n0,9,1\n", 4, "x"), InputError);
  });

  test("unknown model exits 2", () => {
    const result = bridge(
      "--model", "GPT", "--data", stageDir, "--queries", queriesPath,
      "--out", path.join(work, "nope.csv"), "--seed", "1",
    );
    assert.equal(result.status, 2);
    assert.match(result.stderr, /unknown model/);
  });

  test("malformed dataset dir exits 2 before training", () => {
    const empty = fs.mkdtempSync(path.join(work, "empty-"));
    const result = bridge(
      "--model", "TGAT", "--data", empty, "--queries", queriesPath,
      "--out", path.join(work, "nope.csv"), "--seed", "1",
    );
    assert.equal(result.status, 2);
    assert.match(result.stderr, /missing file/);
  });

  test("non-cpu device reported distinctly", () => {
    const result = bridge(
      "--model", "TGAT", "--data", stageDir, "--queries", queriesPath,
      "--out", path.join(work, "nope.csv"), "--seed", "1",
      "--device", "cuda",
    );
    assert.equal(result.status, 2);
    assert.match(result.stderr, /device cuda unavailable/);
  });
});

describe("conformance: every model name emits a valid prediction file", () => {
  for (const name of MODEL_NAMES) {
    test(`${name} on the persistence toy`, () => {
      const out = path.join(work, `${name}.csv`);
      const result = bridge(
        "--model", name, "--data", stageDir, "--queries", queriesPath,
        "--out", out, "--seed", "7",
        "--learning-rate", "0.05", "--max-epochs", "60",
      );
      assert.equal(result.status, 0, result.stderr);
      const validation = tgdiag(
        "validate", "--pred", out, "--queries", queriesPath,
        "--data", stageDir,
      );
      assert.equal(validation.status, 0, validation.stderr);
      const sidecar = JSON.parse(
        fs.readFileSync(`${out}.meta.json`, "utf-8"),
      );
      assert.equal(sidecar.model, name);
      assert.ok(sidecar.epochs_trained >= 1);
    });
  }
});

describe("determinism", () => {
  test("same seed twice gives identical score files", () => {
    const outs = ["det-a.csv", "det-b.csv"].map((name) => {
      const out = path.join(work, name);
      const result = bridge(
        "--model", "TGN", "--data", stageDir, "--queries", queriesPath,
        "--out", out, "--seed", "99",
        "--learning-rate", "0.05", "--max-epochs", "40",
      );
      assert.equal(result.status, 0, result.stderr);
      return fs.readFileSync(out, "utf-8");
    });
    assert.equal(outs[0], outs[1]);
  });
});

describe("end-to-end smoke through the evaluator", () => {
  test("bridge-trained TGAT separates the persistent snapshot", () => {
    const smokeDir = path.join(work, "smoke");
    const manifest = persistenceManifest(smokeDir, [
      {
        kind: "bridge",
        name: "TGAT",
        command: [process.execPath, BRIDGE_MAIN],
        extra_args: ["--learning-rate", "0.05"],
      },
    ]);
    const result = tgdiag("run", manifest);
    assert.equal(result.status, 0, result.stderr);
    const report = JSON.parse(
      fs.readFileSync(path.join(smokeDir, "reports", "TGAT.json"), "utf-8"),
    );
    assert.ok(
      report.statistics.balanced_accuracy >= 0.8,
      `balanced accuracy ${report.statistics.balanced_accuracy} below 0.8`,
    );
    const verdicts = fs.readFileSync(
      path.join(smokeDir, "verdicts.csv"), "utf-8",
    );
    assert.match(verdicts, /persistence,TGAT,(learned|limited)/);
  });
});
