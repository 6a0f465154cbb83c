"""Mixed-integer encoding of the trained predictor inside the UC model."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .milp import MilpModel
from .predictor import MlpPredictor
from .uc import FcucOptions, UcError, UcInstance, UcModel, add_erc_constraint, add_largest_unit_encoding, build_tscuc

NEURON_MODES = ("exact", "relaxed", "fixed-zero", "identity")


class EmbeddingError(ValueError):
    pass


@dataclass
class PeriodEmbedding:
    """Variables and rows of one network copy."""

    features: np.ndarray  # variable ids of x_t
    modes: list[list[str]]  # per layer, per neuron
    zhat: list[dict[int, int]] = field(default_factory=list)  # layer -> {neuron: var id}
    z: list[dict[int, int]] = field(default_factory=list)
    a: list[dict[int, int]] = field(default_factory=list)
    rows: list[int] = field(default_factory=list)
    # neurons whose output was a constant (no live inputs) or unused (no live outputs)
    folded: int = 0
    skipped: int = 0
    outputs: tuple = ()  # ((terms, const) deviation, (terms, const) RoCoF)

    @property
    def binaries(self) -> int:
        return sum(len(layer) for layer in self.a)

    def mode_counts(self) -> dict[str, int]:
        out = dict.fromkeys(NEURON_MODES, 0)
        for layer in self.modes:
            for md in layer:
                out[md] += 1
        return out


@dataclass
class EmbeddingContext:
    periods: dict[int, PeriodEmbedding] = field(default_factory=dict)  # 1-based period -> embedding
    limit_rows: list[int] = field(default_factory=list)

    @property
    def binaries(self) -> int:
        return sum(p.binaries for p in self.periods.values())

    def rows(self) -> list[int]:
        out = []
        for p in self.periods.values():
            out.extend(p.rows)
        return out + self.limit_rows

    def report(self, m: MilpModel) -> dict:
        per = {}
        for t, p in self.periods.items():
            per[str(t)] = {"modes": p.mode_counts(), "binaries": p.binaries,
                           "nonzeros": m.nonzeros(p.rows), "folded_constant": p.folded,
                           "skipped_unused": p.skipped}
        return {"periods": per, "binaries": self.binaries, "nn_nonzeros": m.nonzeros(self.rows())}


def write_report(ctx: EmbeddingContext, m: MilpModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(ctx.report(m), fh, indent=2)
        fh.write("\n")


def assign_modes(pred: MlpPredictor, relax_active: bool) -> list[list[str]]:
    """Per-neuron encoding mode from the stored bounds and active set."""
    if not pred.lb or not pred.ub:
        raise EmbeddingError("predictor has no neuron bounds; compute them before embedding")
    modes = []
    for q in range(pred.n_hidden_layers):
        lb, ub = pred.lb[q], pred.ub[q]
        if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
            raise EmbeddingError(f"layer {q + 1} has unbounded neurons")
        act = pred.active[q] if relax_active and pred.active else np.zeros(lb.size, dtype=bool)
        layer = []
        for l in range(lb.size):
            if ub[l] <= 0:
                layer.append("fixed-zero")
            elif lb[l] >= 0:
                layer.append("identity")
            elif act[l]:
                layer.append("relaxed")
            else:
                layer.append("exact")
        modes.append(layer)
    return modes


def fix_degenerate_neurons(lb: float, ub: float, active: bool) -> str:
    """Mode of a single neuron with bounds [lb, ub]."""
    if ub <= 0:
        return "fixed-zero"
    if lb >= 0:
        return "identity"
    return "relaxed" if active else "exact"


def embed_exact_neuron(m: MilpModel, zh: int, lb: float, ub: float, tag: str) -> tuple[int, int, list[int]]:
    """Big-M ReLU with A = max(UB, -LB); returns (z, a, rows)."""
    big = max(ub, -lb)
    if not np.isfinite(big):
        raise EmbeddingError(f"neuron {tag} has no finite bounds")
    z = m.add_variable(0.0, max(ub, 0.0), name=f"z{tag}")
    a = m.add_binary(f"a{tag}")
    rows = [
        m.add_constraint([(z, 1.0), (zh, -1.0), (a, big)], "<=", big, f"relu_up{tag}"),
        m.add_constraint([(z, 1.0), (zh, -1.0)], ">=", 0.0, f"relu_lo{tag}"),
        m.add_constraint([(z, 1.0), (a, -big)], "<=", 0.0, f"relu_on{tag}"),
    ]
    return z, a, rows


def embed_relaxed_neuron(m: MilpModel, zh: int, lb: float, ub: float, tag: str) -> tuple[int, list[int]]:
    """Triangle hull of the ReLU graph over [lb, ub]; returns (z, rows)."""
    if not lb < 0 < ub:
        raise EmbeddingError(f"neuron {tag} is degenerate (bounds [{lb}, {ub}])")
    slope = ub / (ub - lb)
    z = m.add_variable(0.0, ub, name=f"z{tag}")
    rows = [
        m.add_constraint([(z, 1.0), (zh, -1.0)], ">=", 0.0, f"tri_lo{tag}"),
        m.add_constraint([(z, 1.0), (zh, -slope)], "<=", -slope * lb, f"tri_up{tag}"),
    ]
    return z, rows


def embed_network(m: MilpModel, pred: MlpPredictor, features, relax_active: bool, tag: str = "") -> PeriodEmbedding:
    """Encode the hidden layers over ``features`` (variable ids of raw inputs).

    Zero weights are skipped, neurons without live inputs become constants
    folded into the next layer, and neurons without live outputs are left out.
    """
    features = np.asarray(features, dtype=int)
    if features.size != pred.n_inputs:
        raise EmbeddingError(f"{features.size} feature variables for a {pred.n_inputs}-input network")
    modes = assign_modes(pred, relax_active)
    emb = PeriodEmbedding(features=features, modes=modes)
    W0, b0 = pred.folded_first_layer()
    weights = [W0] + pred.weights[1:]
    biases = [b0] + pred.biases[1:]
    # each input is (var id or -1, constant value)
    inputs = [(int(v), 0.0) for v in features]
    for q, (W, b) in enumerate(zip(weights, biases)):
        nxt = weights[q + 1] if q + 1 < len(weights) else pred.head_w
        lb, ub = pred.lb[q], pred.ub[q]
        outs = []
        emb.zhat.append({})
        emb.z.append({})
        emb.a.append({})
        for l in range(W.shape[1]):
            md = modes[q][l]
            if md == "fixed-zero":
                outs.append((-1, 0.0))
                continue
            if not np.any(nxt[l] != 0.0):
                emb.skipped += 1
                outs.append((-1, 0.0))
                continue
            const = float(b[l])
            terms = []
            for i, (vid, cval) in enumerate(inputs):
                w = W[i, l]
                if w == 0.0:
                    continue
                if vid < 0:
                    const += w * cval
                else:
                    terms.append((vid, float(w)))
            ntag = f"[{q + 1},{l + 1}{tag}]"
            if not terms:
                emb.folded += 1
                outs.append((-1, max(const, 0.0)))
                continue
            if md == "identity":
                z = m.add_variable(lb[l], max(ub[l], lb[l]), name=f"z{ntag}")
                emb.rows.append(m.add_constraint([(z, 1.0)] + [(v, -c) for v, c in terms], "=", const,
                                                 f"zdef{ntag}"))
                emb.z[q][l] = z
                outs.append((z, 0.0))
                continue
            zh = m.add_variable(lb[l], ub[l], name=f"zhat{ntag}")
            emb.rows.append(m.add_constraint([(zh, 1.0)] + [(v, -c) for v, c in terms], "=", const,
                                             f"zdef{ntag}"))
            emb.zhat[q][l] = zh
            if md == "exact":
                z, a, rows = embed_exact_neuron(m, zh, lb[l], ub[l], ntag)
                emb.a[q][l] = a
            else:
                z, rows = embed_relaxed_neuron(m, zh, lb[l], ub[l], ntag)
            emb.rows.extend(rows)
            emb.z[q][l] = z
            outs.append((z, 0.0))
        inputs = outs
    heads = []
    for h in range(2):
        const = float(pred.head_b[h])
        terms = []
        for l, (vid, cval) in enumerate(inputs):
            w = pred.head_w[l, h]
            if w == 0.0:
                continue
            if vid < 0:
                const += w * cval
            else:
                terms.append((vid, float(w)))
        heads.append((terms, const))
    emb.outputs = tuple(heads)
    return emb


def encode_features(uc: UcModel, t: int) -> np.ndarray:
    """Feature variable ids ``[u, rho, P]`` for 1-based period ``t``."""
    k = t - 1
    if k not in uc.mu or k not in uc.rho:
        raise EmbeddingError(f"largest-unit encoding missing for period {t}")
    return np.concatenate([uc.u[:, k], uc.rho[k], uc.p[:, k]]).astype(int)


def add_frequency_limits(m: MilpModel, emb: PeriodEmbedding, opts: FcucOptions, tag: str = "") -> list[int]:
    """Predicted deviation <= f_nom - f_lim and predicted RoCoF magnitude <= RoCoF_lim."""
    (dev_terms, dev_c), (rcf_terms, rcf_c) = emb.outputs
    return [
        m.add_constraint(dev_terms, "<=", opts.deviation_limit - dev_c, f"fdev{tag}"),
        m.add_constraint(rcf_terms, "<=", opts.rocof_lim - rcf_c, f"frcf{tag}"),
    ]


def embed_predictor(uc: UcModel, pred: MlpPredictor, opts: FcucOptions) -> EmbeddingContext:
    """One network copy plus frequency limits for each constrained period."""
    if opts.mode not in ("dnn-exact", "dnn-active"):
        raise EmbeddingError(f"mode {opts.mode!r} does not embed a predictor")
    n_gen = uc.inst.grid.num_generators
    if pred.n_inputs != 3 * n_gen:
        raise EmbeddingError(f"predictor expects {pred.n_inputs} features, grid gives {3 * n_gen}")
    ctx = EmbeddingContext()
    for t in opts.periods:
        emb = embed_network(uc.milp, pred, encode_features(uc, t), opts.mode == "dnn-active", tag=f",{t}")
        ctx.periods[t] = emb
        ctx.limit_rows.extend(add_frequency_limits(uc.milp, emb, opts, tag=f"[{t}]"))
    uc.nn_rows.extend(ctx.rows())
    uc.extras["embedding"] = ctx
    return ctx


def build_fcuc(inst: UcInstance, opts: FcucOptions, pred: MlpPredictor | None = None) -> UcModel:
    """T-SCUC plus the frequency constraints selected by ``opts.mode``."""
    uc = build_tscuc(inst)
    if opts.mode == "none":
        return uc
    add_largest_unit_encoding(uc, opts)
    if opts.mode == "erc":
        add_erc_constraint(uc, opts)
        return uc
    if pred is None:
        raise UcError(f"mode {opts.mode!r} needs a trained predictor")
    embed_predictor(uc, pred, opts)
    return uc


def standalone_nonzeros(pred: MlpPredictor, relax_active: bool) -> int:
    """NN-constraint nonzeros of one network copy over free feature variables."""
    m = MilpModel("nn")
    feats = [m.add_variable(-np.inf, np.inf) for _ in range(pred.n_inputs)]
    emb = embed_network(m, pred, feats, relax_active)
    opts = FcucOptions()
    rows = emb.rows + add_frequency_limits(m, emb, opts)
    return m.nonzeros(rows)
