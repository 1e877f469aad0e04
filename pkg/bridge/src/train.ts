/**
 * Training loop: mini-batch Adam on binary cross-entropy with early
 * stopping.  When the dataset carries a split and the example files
 * include validation-segment timesteps, validation loss drives the
 * stopping criterion; otherwise training loss is used.
 */

import { ModelConfig, TrainConfig } from "./configs.js";
import { Dataset, Triple } from "./files.js";
import {
  Adam,
  Gradients,
  LinkScorer,
  TrainingDivergence,
  buildHistory,
  makeGradients,
} from "./model.js";
import { Rng, deriveSeed } from "./rng.js";

export interface TrainResult {
  model: LinkScorer;
  epochsTrained: number;
  stoppedBy: string;
  finalLoss: number;
  monitorLoss: number;
}

interface Example {
  triple: Triple;
  label: number;
}

function splitExamples(dataset: Dataset): { train: Example[]; val: Example[] } {
  const train: Example[] = [];
  const val: Example[] = [];
  const boundary = dataset.trainEnd;
  const push = (triple: Triple, label: number) => {
    if (boundary !== null && triple.t > boundary) {
      if (dataset.valEnd === null || triple.t <= dataset.valEnd) {
        val.push({ triple, label });
      }
      return; // anything past the validation boundary is never trained on
    }
    train.push({ triple, label });
  };
  for (const p of dataset.positives) push(p, 1);
  for (const n of dataset.negatives) push(n, 0);
  return { train, val };
}

function meanLoss(model: LinkScorer, examples: Example[]): number {
  const [repU, repV, feats] = model.scratch();
  let total = 0;
  for (const { triple, label } of examples) {
    const p = model.score(triple, repU, repV, feats);
    total += label === 1 ? -Math.log(p) : -Math.log1p(-p);
  }
  return total / examples.length;
}

export function train(
  dataset: Dataset, config: ModelConfig, trainConfig: TrainConfig, seed: bigint,
): TrainResult {
  const history = buildHistory(
    dataset.edges, dataset.nodeCount, dataset.trainEnd, config.neighborCount,
  );
  const model = new LinkScorer(
    config, dataset.nodeCount, history, new Rng(deriveSeed(seed, 1n)),
    trainConfig.embeddingDim,
  );
  const { train: trainSet, val: valSet } = splitExamples(dataset);
  if (trainSet.length === 0) {
    throw new TrainingDivergence("no training examples under the split boundary");
  }
  const monitor = valSet.length > 0 ? "validation_loss" : "training_loss";
  const shuffleRng = new Rng(deriveSeed(seed, 2n));
  const order = new Int32Array(trainSet.length);
  for (let i = 0; i < order.length; i++) order[i] = i;

  const optimizer = new Adam(model, trainConfig.learningRate);
  const grads: Gradients = makeGradients(model);
  const [repU, repV, feats] = model.scratch();

  let best = Number.POSITIVE_INFINITY;
  let sinceBest = 0;
  let stoppedBy = "max_epochs";
  let epochs = 0;
  let epochLoss = Number.POSITIVE_INFINITY;

  for (let epoch = 0; epoch < trainConfig.maxEpochs; epoch++) {
    shuffleRng.shuffle(order);
    let totalLoss = 0;
    for (let start = 0; start < order.length; start += trainConfig.batchSize) {
      const end = Math.min(start + trainConfig.batchSize, order.length);
      grads.emb.fill(0);
      grads.match.fill(0);
      grads.wFeat.fill(0);
      grads.bias = 0;
      for (let i = start; i < end; i++) {
        const example = trainSet[order[i]];
        totalLoss += model.accumulate(
          example.triple, example.label, grads, repU, repV, feats,
        );
      }
      optimizer.update(model, grads, end - start);
    }
    epochLoss = totalLoss / trainSet.length;
    if (!Number.isFinite(epochLoss)) {
      throw new TrainingDivergence(
        `non-finite training loss at epoch ${epoch + 1} ` +
        `(learning rate ${trainConfig.learningRate})`,
      );
    }
    epochs = epoch + 1;
    const monitored = monitor === "validation_loss"
      ? meanLoss(model, valSet)
      : epochLoss;
    if (monitored < best - trainConfig.tolerance) {
      best = monitored;
      sinceBest = 0;
    } else {
      sinceBest += 1;
      if (sinceBest >= trainConfig.patience) {
        stoppedBy = "early_stopping";
        break;
      }
    }
  }
  return {
    model,
    epochsTrained: epochs,
    stoppedBy,
    finalLoss: epochLoss,
    monitorLoss: best,
  };
}

export function predict(model: LinkScorer, queries: Triple[]): Float64Array {
  const [repU, repV, feats] = model.scratch();
  const scores = new Float64Array(queries.length);
  for (let i = 0; i < queries.length; i++) {
    scores[i] = model.score(queries[i], repU, repV, feats);
  }
  return scores;
}
