/**
 * bridge CLI: train a named link scorer on a dataset directory and score
 * a query file, communicating only via files and exit codes.
 *
 *   node dist/src/main.js --model TGAT --data d/ --queries q.csv \
 *       --out p.csv --seed 7 [--learning-rate 0.05] [--max-epochs 300] ...
 *
 * Exit codes: 0 success, 1 training failure (divergence), 2 input error
 * (unknown model, missing or malformed files, unsupported device).
 */

import { MODEL_CONFIGS, MODEL_NAMES, TRAIN_DEFAULTS, TrainConfig } from "./configs.js";
import { InputError, readDataset, readQueries, writePredictions, writeSidecar } from "./files.js";
import { TrainingDivergence } from "./model.js";
import { predict, train } from "./train.js";

interface CliArgs {
  model: string;
  data: string;
  queries: string;
  out: string;
  seed: bigint;
  device: string;
  train: TrainConfig;
}

function parseArgs(argv: string[]): CliArgs {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith("--") || i + 1 >= argv.length) {
      throw new InputError(`malformed arguments near ${flag}`);
    }
    values.set(flag.slice(2), argv[i + 1]);
  }
  for (const required of ["model", "data", "queries", "out", "seed"]) {
    if (!values.has(required)) {
      throw new InputError(`missing required flag --${required}`);
    }
  }
  const known = new Set([
    "model", "data", "queries", "out", "seed", "device", "learning-rate",
    "batch-size", "max-epochs", "patience", "tolerance", "embedding-dim",
  ]);
  for (const key of values.keys()) {
    if (!known.has(key)) throw new InputError(`unknown flag --${key}`);
  }
  const num = (key: string, fallback: number): number => {
    const raw = values.get(key);
    if (raw === undefined) return fallback;
    const parsed = Number(raw);
    if (!Number.isFinite(parsed) || parsed <= 0) {
      throw new InputError(`--${key} must be a positive number, got ${raw}`);
    }
    return parsed;
  };
  return {
    model: values.get("model")!,
    data: values.get("data")!,
    queries: values.get("queries")!,
    out: values.get("out")!,
    seed: BigInt(values.get("seed")!),
    device: values.get("device") ?? "cpu",
    train: {
      learningRate: num("learning-rate", TRAIN_DEFAULTS.learningRate),
      batchSize: num("batch-size", TRAIN_DEFAULTS.batchSize),
      maxEpochs: num("max-epochs", TRAIN_DEFAULTS.maxEpochs),
      patience: num("patience", TRAIN_DEFAULTS.patience),
      tolerance: num("tolerance", TRAIN_DEFAULTS.tolerance),
      embeddingDim: values.has("embedding-dim")
        ? num("embedding-dim", 0)
        : TRAIN_DEFAULTS.embeddingDim,
    },
  };
}

export function run(argv: string[]): number {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
    if (args.device !== "cpu") {
      throw new InputError(
        `device ${args.device} unavailable: this bridge computes on cpu only`,
      );
    }
    if (!(args.model in MODEL_CONFIGS)) {
      throw new InputError(
        `unknown model ${args.model}; expected one of ${MODEL_NAMES.join(", ")}`,
      );
    }
  } catch (err) {
    if (err instanceof InputError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }

  try {
    const dataset = readDataset(args.data);
    const queries = readQueries(args.queries, dataset.nodeCount);
    const config = MODEL_CONFIGS[args.model];
    const result = train(dataset, config, args.train, args.seed);
    const scores = predict(result.model, queries);
    writePredictions(args.out, queries, scores);
    writeSidecar(`${args.out}.meta.json`, {
      model: args.model,
      seed: args.seed.toString(),
      device: args.device,
      epochs_trained: result.epochsTrained,
      stopped_by: result.stoppedBy,
      final_training_loss: result.finalLoss,
      best_monitored_loss: result.monitorLoss,
      optimizer: "adam",
      loss: "bce",
      dropout: 0,
      structure: {
        layers: config.layers,
        heads: config.heads,
        embedding_dim: result.model.dim, // rounded up to a heads multiple
        time_dim: config.timeDim,
        neighbor_count: config.neighborCount,
        memory: config.memory,
      },
      training: {
        learning_rate: args.train.learningRate,
        batch_size: args.train.batchSize,
        max_epochs: args.train.maxEpochs,
        patience: args.train.patience,
        tolerance: args.train.tolerance,
      },
    });
    console.error(
      `${args.model}: trained ${result.epochsTrained} epochs ` +
      `(${result.stoppedBy}), scored ${queries.length} queries`,
    );
    return 0;
  } catch (err) {
    if (err instanceof InputError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    if (err instanceof TrainingDivergence) {
      console.error(`training failure: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

process.exit(run(process.argv.slice(2)));
