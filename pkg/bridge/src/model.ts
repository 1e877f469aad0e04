/**
 * A compact trainable link scorer over node embeddings.
 *
 * score(u, v, t) = sigmoid( sum_h m_h * <p_u, p_v>_h + w . phi(u, v, t) + b )
 *
 * where p is the embedding table after `layers - 1` neighbor-propagation
 * rounds over the training adjacency, <.,.>_h is the dot product of the
 * h-th embedding block, and phi collects engineered temporal features:
 * a geometric ladder of pair-recency decays, optional node-activity
 * decays (memory variants), and log-degrees.  Everything is trained
 * end-to-end with Adam on binary cross-entropy.
 */

import { ModelConfig } from "./configs.js";
import { Triple } from "./files.js";
import { Rng } from "./rng.js";

export class TrainingDivergence extends Error {}

interface HistoryIndex {
  pairLast: Map<number, number>;
  nodeLast: Float64Array;
  nodeSeen: Uint8Array;
  degrees: Float64Array;
  neighbors: Int32Array[]; // most recent distinct neighbors, per node
}

function pairKey(u: number, v: number, nodeCount: number): number {
  return u * nodeCount + v;
}

export function buildHistory(
  edges: Triple[], nodeCount: number, trainEnd: number | null,
  neighborCount: number,
): HistoryIndex {
  const pairLast = new Map<number, number>();
  const nodeLast = new Float64Array(nodeCount);
  const nodeSeen = new Uint8Array(nodeCount);
  const degrees = new Float64Array(nodeCount);
  const recent: number[][] = Array.from({ length: nodeCount }, () => []);
  for (const { u, v, t } of edges) {
    if (trainEnd !== null && t > trainEnd) continue;
    const key = pairKey(u, v, nodeCount);
    const prev = pairLast.get(key);
    if (prev === undefined || t > prev) pairLast.set(key, t);
    for (const [a, b] of [[u, v], [v, u]] as const) {
      if (!nodeSeen[a] || t > nodeLast[a]) nodeLast[a] = t;
      nodeSeen[a] = 1;
      degrees[a] += 1;
      const list = recent[a];
      const at = list.indexOf(b);
      if (at >= 0) list.splice(at, 1);
      list.push(b);
      if (list.length > neighborCount) list.shift();
    }
  }
  return {
    pairLast,
    nodeLast,
    nodeSeen,
    degrees,
    neighbors: recent.map((list) => Int32Array.from(list)),
  };
}

export class LinkScorer {
  readonly config: ModelConfig;
  readonly nodeCount: number;
  readonly dim: number;
  readonly featureCount: number;
  readonly history: HistoryIndex;

  emb: Float64Array; // nodeCount x dim
  match: Float64Array; // one weight per head
  wFeat: Float64Array;
  bias: number;

  constructor(
    config: ModelConfig, nodeCount: number, history: HistoryIndex,
    rng: Rng, embeddingDim: number | null = null,
  ) {
    this.config = config;
    this.nodeCount = nodeCount;
    this.dim = embeddingDim ?? config.embeddingDim;
    if (this.dim % config.heads !== 0) {
      this.dim += config.heads - (this.dim % config.heads);
    }
    this.history = history;
    this.featureCount =
      config.timeDim + (config.memory ? 2 : 0) + 2; // decays + log-degrees
    this.emb = new Float64Array(nodeCount * this.dim);
    for (let i = 0; i < this.emb.length; i++) this.emb[i] = 0.1 * rng.normal();
    this.match = new Float64Array(config.heads).fill(1.0);
    this.wFeat = new Float64Array(this.featureCount);
    for (let i = 0; i < this.featureCount; i++) this.wFeat[i] = 0.01 * rng.normal();
    this.bias = 0.0;
  }

  /** Propagated representation of one node (embedding + mean neighbor). */
  representation(node: number, out: Float64Array): void {
    const d = this.dim;
    out.set(this.emb.subarray(node * d, node * d + d));
    if (this.config.layers < 2) return;
    const neighbors = this.history.neighbors[node];
    if (neighbors.length === 0) return;
    const scale = 0.5 / neighbors.length;
    for (const nbr of neighbors) {
      const base = nbr * d;
      for (let k = 0; k < d; k++) out[k] += scale * this.emb[base + k];
    }
  }

  features(q: Triple, out: Float64Array): void {
    const { config, history } = this;
    const pair = history.pairLast.get(pairKey(q.u, q.v, this.nodeCount));
    let offset = 0;
    let tau = 1.0;
    for (let j = 0; j < config.timeDim; j++) {
      out[offset + j] =
        pair === undefined ? 0.0 : Math.exp(-Math.max(0, q.t - pair) / tau);
      tau *= 2.0;
    }
    offset += config.timeDim;
    if (config.memory) {
      out[offset] = history.nodeSeen[q.u]
        ? Math.exp(-Math.max(0, q.t - history.nodeLast[q.u]))
        : 0.0;
      out[offset + 1] = history.nodeSeen[q.v]
        ? Math.exp(-Math.max(0, q.t - history.nodeLast[q.v]))
        : 0.0;
      offset += 2;
    }
    out[offset] = Math.log1p(history.degrees[q.u]);
    out[offset + 1] = Math.log1p(history.degrees[q.v]);
  }

  logit(q: Triple, repU: Float64Array, repV: Float64Array,
        feats: Float64Array): number {
    this.representation(q.u, repU);
    this.representation(q.v, repV);
    this.features(q, feats);
    const heads = this.config.heads;
    const block = this.dim / heads;
    let value = this.bias;
    for (let h = 0; h < heads; h++) {
      let dot = 0.0;
      for (let k = h * block; k < (h + 1) * block; k++) dot += repU[k] * repV[k];
      value += this.match[h] * dot;
    }
    for (let j = 0; j < this.featureCount; j++) value += this.wFeat[j] * feats[j];
    return value;
  }

  score(q: Triple, repU: Float64Array, repV: Float64Array,
        feats: Float64Array): number {
    const z = this.logit(q, repU, repV, feats);
    return z >= 0 ? 1 / (1 + Math.exp(-z)) : Math.exp(z) / (1 + Math.exp(z));
  }

  scratch(): [Float64Array, Float64Array, Float64Array] {
    return [
      new Float64Array(this.dim),
      new Float64Array(this.dim),
      new Float64Array(this.featureCount),
    ];
  }

  /**
   * Accumulate gradients for one example; returns its loss term.
   * Gradients flow into embeddings through the head dot products and,
   * when propagation is on, back through the neighbor averaging.
   */
  accumulate(
    q: Triple, label: number, grads: Gradients,
    repU: Float64Array, repV: Float64Array, feats: Float64Array,
  ): number {
    const z = this.logit(q, repU, repV, feats);
    const p = z >= 0 ? 1 / (1 + Math.exp(-z)) : Math.exp(z) / (1 + Math.exp(z));
    const residual = p - label;
    const heads = this.config.heads;
    const block = this.dim / heads;

    for (let h = 0; h < heads; h++) {
      let dot = 0.0;
      for (let k = h * block; k < (h + 1) * block; k++) dot += repU[k] * repV[k];
      grads.match[h] += residual * dot;
      const weight = residual * this.match[h];
      for (let k = h * block; k < (h + 1) * block; k++) {
        this.spreadRepGrad(q.u, k, weight * repV[k], grads.emb);
        this.spreadRepGrad(q.v, k, weight * repU[k], grads.emb);
      }
    }
    for (let j = 0; j < this.featureCount; j++) {
      grads.wFeat[j] += residual * feats[j];
    }
    grads.bias += residual;

    // honest log-loss; saturating on the wrong side diverges to infinity
    return label === 1 ? -Math.log(p) : -Math.log1p(-p);
  }

  private spreadRepGrad(node: number, k: number, value: number,
                        gradEmb: Float64Array): void {
    gradEmb[node * this.dim + k] += value;
    if (this.config.layers < 2) return;
    const neighbors = this.history.neighbors[node];
    if (neighbors.length === 0) return;
    const scale = 0.5 / neighbors.length;
    for (const nbr of neighbors) gradEmb[nbr * this.dim + k] += scale * value;
  }
}

export interface Gradients {
  emb: Float64Array;
  match: Float64Array;
  wFeat: Float64Array;
  bias: number;
}

export function makeGradients(model: LinkScorer): Gradients {
  return {
    emb: new Float64Array(model.emb.length),
    match: new Float64Array(model.match.length),
    wFeat: new Float64Array(model.wFeat.length),
    bias: 0.0,
  };
}

/** Adam over the scorer's flat parameter groups. */
export class Adam {
  private readonly lr: number;
  private readonly beta1 = 0.9;
  private readonly beta2 = 0.999;
  private readonly eps = 1e-8;
  private step = 0;
  private m: Float64Array;
  private v: Float64Array;
  private readonly size: number;

  constructor(model: LinkScorer, learningRate: number) {
    this.lr = learningRate;
    this.size = model.emb.length + model.match.length + model.wFeat.length + 1;
    this.m = new Float64Array(this.size);
    this.v = new Float64Array(this.size);
  }

  update(model: LinkScorer, grads: Gradients, batchSize: number): void {
    this.step += 1;
    const correction1 = 1 - Math.pow(this.beta1, this.step);
    const correction2 = 1 - Math.pow(this.beta2, this.step);
    let cursor = 0;
    const apply = (params: Float64Array, grad: Float64Array) => {
      for (let i = 0; i < params.length; i++, cursor++) {
        const g = grad[i] / batchSize;
        this.m[cursor] = this.beta1 * this.m[cursor] + (1 - this.beta1) * g;
        this.v[cursor] = this.beta2 * this.v[cursor] + (1 - this.beta2) * g * g;
        const mHat = this.m[cursor] / correction1;
        const vHat = this.v[cursor] / correction2;
        params[i] -= (this.lr * mHat) / (Math.sqrt(vHat) + this.eps);
      }
    };
    apply(model.emb, grads.emb);
    apply(model.match, grads.match);
    apply(model.wFeat, grads.wFeat);
    const g = grads.bias / batchSize;
    this.m[cursor] = this.beta1 * this.m[cursor] + (1 - this.beta1) * g;
    this.v[cursor] = this.beta2 * this.v[cursor] + (1 - this.beta2) * g * g;
    model.bias -= (this.lr * (this.m[cursor] / correction1)) /
      (Math.sqrt(this.v[cursor] / correction2) + this.eps);
  }
}
