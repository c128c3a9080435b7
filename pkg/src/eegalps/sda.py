"""Symbolic discriminant analysis evolved with an age-layered GA (ALPS).

Programs are flat prefix lists. A node is one of

* an operator name: ``'+'``, ``'-'``, ``'*'``, ``'/'`` (protected division),
* an ``int``: index into the feature vector,
* a ``float``: constant.

The discriminant's sign gives the class (+1 on ties); fitness is the mean
squared error between the output clipped to [-1, 1] and labels in {-1, +1}.

Individuals carry a genotypic age. Fresh random individuals start at 1 and
any offspring, including a clone carried over as an elite, is one older than
its oldest parent. Layer l accepts ages up to ``age_gap * (l + 1)`` and the
top layer is unbounded; over-age individuals move up a layer or are dropped.
Every ``age_gap`` generations the bottom layer is reseeded at random.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

OPERATORS = ("+", "-", "*", "/")
ARITY = {op: 2 for op in OPERATORS}
DIV_EPS = 1e-9
VALUE_LIMIT = 1e12


class EmptyData(ValueError):
    pass


class EmptyPool(ValueError):
    pass


# -- program structure ---------------------------------------------------------

def is_operator(node) -> bool:
    return isinstance(node, str)


def is_feature(node) -> bool:
    return isinstance(node, (int, np.integer)) and not isinstance(node, bool)


def subtree_end(program: Sequence, start: int) -> int:
    """Index one past the subtree rooted at ``start``."""
    need = 1
    end = start
    while need:
        node = program[end]
        need += ARITY[node] - 1 if is_operator(node) else -1
        end += 1
    return end


def node_depths(program: Sequence) -> list[int]:
    """Depth of every node, root at depth 1."""
    depths = []
    pending: list[int] = []  # children still expected at each open operator
    for node in program:
        depths.append(len(pending) + 1)
        if pending:
            pending[-1] -= 1
        if is_operator(node):
            pending.append(ARITY[node])
        while pending and pending[-1] == 0:
            pending.pop()
    return depths


def depth(program: Sequence) -> int:
    return max(node_depths(program))


def feature_indices(program: Sequence) -> list[int]:
    return [int(n) for n in program if is_feature(n)]


def validate_program(program: Sequence, n_features: int, max_depth: int | None = None) -> None:
    try:
        well_formed = bool(program) and subtree_end(program, 0) == len(program)
    except (IndexError, KeyError):
        well_formed = False
    if not well_formed:
        raise ValueError("program is not a single well-formed prefix expression")
    for node in program:
        if is_operator(node):
            if node not in ARITY:
                raise ValueError(f"unknown operator {node!r}")
        elif is_feature(node):
            if not 0 <= node < n_features:
                raise ValueError(f"feature index {node} out of range for {n_features} features")
        elif not isinstance(node, float):
            raise ValueError(f"invalid node {node!r}")
    if max_depth is not None and depth(program) > max_depth:
        raise ValueError(f"program depth {depth(program)} exceeds {max_depth}")


def to_text(program: Sequence) -> str:
    """S-expression form, e.g. ``(+ x12 (* -0.5 x3))``."""

    def emit(i):
        node = program[i]
        if is_operator(node):
            parts = [node]
            j = i + 1
            for _ in range(ARITY[node]):
                text, j = emit(j)
                parts.append(text)
            return "(" + " ".join(parts) + ")", j
        if is_feature(node):
            return f"x{int(node)}", i + 1
        return repr(float(node)), i + 1

    text, end = emit(0)
    if end != len(program):
        raise ValueError("trailing nodes after expression")
    return text


def from_text(text: str) -> list:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    program: list = []
    for tok in tokens:
        if tok in "()":
            continue
        if tok in ARITY:
            program.append(tok)
        elif tok.startswith("x"):
            program.append(int(tok[1:]))
        else:
            program.append(float(tok))
    try:
        validate_program(program, n_features=sys.maxsize)
    except ValueError:
        raise ValueError(f"cannot parse expression {text!r}") from None
    return program


# -- generation & evaluation ---------------------------------------------------

def _terminal(rng, n_features: int, const_prob: float):
    if rng.random() < const_prob:
        return float(rng.uniform(-1.0, 1.0))
    return int(rng.integers(n_features))


def random_expression(rng, n_features: int, max_depth: int, const_prob: float = 0.3,
                      method: str | None = None, init_depth: int | None = None) -> list:
    """Ramped half-and-half tree: depth drawn from 1..init_depth, full or grow."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    top = min(max_depth, init_depth or max_depth)
    target = int(rng.integers(1, top + 1))
    if method is None:
        method = "full" if rng.random() < 0.5 else "grow"
    program: list = []
    stack = [1]  # depth of each node still to be generated
    while stack:
        d = stack.pop()
        if d >= target:
            program.append(_terminal(rng, n_features, const_prob))
            continue
        if method == "grow" and d > 1 and rng.random() < 0.5:
            program.append(_terminal(rng, n_features, const_prob))
            continue
        op = OPERATORS[int(rng.integers(len(OPERATORS)))]
        program.append(op)
        stack.extend([d + 1] * ARITY[op])
    return program


def _apply(op: str, a, b):
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    else:
        small = np.abs(b) < DIV_EPS
        r = np.where(small, 1.0, a / np.where(small, 1.0, b))
    return np.clip(r, -VALUE_LIMIT, VALUE_LIMIT)


def evaluate_batch(program: Sequence, X) -> np.ndarray:
    """Evaluate on every row of X (n_samples, n_features); always finite."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    stack = []
    for node in reversed(program):
        if is_operator(node):
            a = stack.pop()
            b = stack.pop()
            stack.append(_apply(node, a, b))
        elif is_feature(node):
            stack.append(np.clip(X[:, node], -VALUE_LIMIT, VALUE_LIMIT))
        else:
            stack.append(np.full(n, float(node)))
    return stack[0]


def evaluate(program: Sequence, features) -> float:
    return float(evaluate_batch(program, np.asarray(features, dtype=float)[None, :])[0])


def fitness_mse(program: Sequence, X, y) -> float:
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise EmptyData("fitness needs at least one sample")
    out = np.clip(evaluate_batch(program, X), -1.0, 1.0)
    return float(np.mean((out - y) ** 2))


def classify(program: Sequence, features) -> int:
    return 1 if evaluate(program, features) >= 0 else -1


def classify_batch(program: Sequence, X) -> np.ndarray:
    return np.where(evaluate_batch(program, X) >= 0, 1, -1)


# -- variation -----------------------------------------------------------------

def crossover(a: Sequence, b: Sequence, rng, max_depth: int, attempts: int = 5) -> list:
    """Replace a random subtree of ``a`` with a random subtree of ``b``."""
    for _ in range(attempts):
        s = int(rng.integers(len(a)))
        e = subtree_end(a, s)
        bs = int(rng.integers(len(b)))
        be = subtree_end(b, bs)
        child = list(a[:s]) + list(b[bs:be]) + list(a[e:])
        if depth(child) <= max_depth:
            return child
    return list(a)


def mutate(program: Sequence, p: float, rng, n_features: int, max_depth: int,
           const_prob: float = 0.3) -> list:
    """With probability p, swap a uniformly chosen subtree for a fresh random one."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("mutation probability must lie in [0, 1]")
    if rng.random() >= p:
        return list(program)
    s = int(rng.integers(len(program)))
    e = subtree_end(program, s)
    room = max_depth - node_depths(program)[s] + 1
    fresh = random_expression(rng, n_features, room, const_prob)
    return list(program[:s]) + fresh + list(program[e:])


# -- ALPS ---------------------------------------------------------------------

@dataclass
class Individual:
    program: list
    age: int = 1
    fitness: float = math.inf

    def __post_init__(self):
        if self.age < 1:
            raise ValueError("ALPS ages start at 1")


@dataclass
class AgeLayer:
    index: int
    max_age: float
    members: list[Individual] = field(default_factory=list)


@dataclass(frozen=True)
class AlpsConfig:
    population_size: int = 300
    max_generations: int = 702
    mutation_probability: float = 0.18
    n_layers: int = 5
    age_gap: int = 10
    tournament_size: int = 3
    max_depth: int = 8
    init_depth: int = 5
    const_prob: float = 0.3
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        counts = (self.population_size, self.n_layers, self.age_gap, self.tournament_size,
                  self.max_depth, self.init_depth)
        if any(int(c) != c or c < 1 for c in counts):
            raise ValueError("ALPS counts must be integers >= 1")
        if self.max_generations < 0 or self.elitism < 0:
            raise ValueError("max_generations and elitism must be >= 0")
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise ValueError("mutation_probability must lie in [0, 1]")
        if not 0.0 <= self.const_prob <= 1.0:
            raise ValueError("const_prob must lie in [0, 1]")

    @property
    def layer_size(self) -> int:
        return max(1, self.population_size // self.n_layers)

    def max_age(self, layer: int) -> float:
        return math.inf if layer == self.n_layers - 1 else self.age_gap * (layer + 1)


@dataclass
class GenerationStats:
    generation: int
    best_mse: float
    mean_mse: float
    layer0_refresh: bool


@dataclass
class AlpsResult:
    best: Individual
    history: list[GenerationStats]
    layers: list[AgeLayer]


BirthHook = Callable[[Individual, Sequence[Individual]], None]


def offspring_age(parents: Sequence[Individual]) -> int:
    return 1 + max((p.age for p in parents), default=0)


def tournament_select(pool: Sequence[Individual], k: int, rng) -> Individual:
    """Fittest of k members drawn without replacement (first drawn wins ties)."""
    if not pool:
        raise EmptyPool("tournament over an empty pool")
    picks = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
    return min((pool[i] for i in picks), key=lambda ind: ind.fitness)


def _layer_rng(cfg: AlpsConfig, generation: int, stream: int):
    return np.random.default_rng([cfg.seed, generation, stream])


def _evaluate(ind: Individual, X, y) -> Individual:
    ind.fitness = fitness_mse(ind.program, X, y)
    return ind


def _insert(layer: AgeLayer, ind: Individual, capacity: int) -> bool:
    if len(layer.members) < capacity:
        layer.members.append(ind)
        return True
    worst = max(range(len(layer.members)), key=lambda i: layer.members[i].fitness)
    if ind.fitness < layer.members[worst].fitness:
        layer.members[worst] = ind
        return True
    return False


def _random_layer(cfg: AlpsConfig, rng, n_features: int, X, y, on_birth) -> list[Individual]:
    members = []
    for _ in range(cfg.layer_size):
        ind = Individual(random_expression(rng, n_features, cfg.max_depth, cfg.const_prob,
                                           init_depth=cfg.init_depth), offspring_age([]))
        _evaluate(ind, X, y)
        if on_birth:
            on_birth(ind, ())
        members.append(ind)
    return members


def init_layers(cfg: AlpsConfig, X, y, on_birth: BirthHook | None = None) -> list[AgeLayer]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return [AgeLayer(l, cfg.max_age(l),
                     _random_layer(cfg, _layer_rng(cfg, 0, l), X.shape[1], X, y, on_birth))
            for l in range(cfg.n_layers)]


def _breed_layer(layers: list[AgeLayer], l: int, cfg: AlpsConfig, X, y, rng,
                 on_birth: BirthHook | None) -> list[Individual]:
    layer = layers[l]
    if not layer.members:
        return []
    pool = layer.members + (layers[l - 1].members if l > 0 else [])
    n_features = X.shape[1]
    new: list[Individual] = []
    for elite in sorted(layer.members, key=lambda ind: ind.fitness)[:cfg.elitism]:
        clone = Individual(list(elite.program), offspring_age([elite]), elite.fitness)
        if on_birth:
            on_birth(clone, (elite,))
        new.append(clone)
    while len(new) < cfg.layer_size:
        p1 = tournament_select(pool, cfg.tournament_size, rng)
        p2 = tournament_select(pool, cfg.tournament_size, rng)
        program = crossover(p1.program, p2.program, rng, cfg.max_depth)
        program = mutate(program, cfg.mutation_probability, rng, n_features, cfg.max_depth,
                         cfg.const_prob)
        child = _evaluate(Individual(program, offspring_age([p1, p2])), X, y)
        if on_birth:
            on_birth(child, (p1, p2))
        new.append(child)
    return new


def alps_step(layers: list[AgeLayer], cfg: AlpsConfig, X, y, generation: int,
              on_birth: BirthHook | None = None) -> tuple[list[AgeLayer], bool]:
    """Advance every layer one generation; returns the new layers and whether L0 was reseeded.

    Layers breed top-down from the previous generation (own layer plus the one
    below). Over-age individuals then climb bottom-up, displacing the worst
    member of a higher layer when fitter and dropped otherwise.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = len(layers)
    bred: list[list[Individual]] = [[] for _ in range(n)]
    for l in range(n - 1, -1, -1):
        bred[l] = _breed_layer(layers, l, cfg, X, y, _layer_rng(cfg, generation, l), on_birth)

    new_layers = [AgeLayer(l, cfg.max_age(l)) for l in range(n)]
    climbers: list[Individual] = []
    for l, layer in enumerate(new_layers):
        layer.members = [ind for ind in bred[l] if ind.age <= layer.max_age]
        moving = [ind for ind in bred[l] if ind.age > layer.max_age]
        for ind in sorted(climbers, key=lambda ind: ind.fitness):
            if ind.age > layer.max_age:
                moving.append(ind)
            else:
                _insert(layer, ind, cfg.layer_size)
        climbers = moving

    refreshed = False
    if generation > 0 and generation % cfg.age_gap == 0:
        if n > 1:
            for ind in sorted(new_layers[0].members, key=lambda ind: ind.fitness):
                _insert(new_layers[1], ind, cfg.layer_size)
        rng = _layer_rng(cfg, generation, n)
        new_layers[0].members = _random_layer(cfg, rng, X.shape[1], X, y, on_birth)
        refreshed = True
    return new_layers, refreshed


def _stats(generation: int, layers: list[AgeLayer], best: Individual, refreshed: bool) -> GenerationStats:
    fits = [ind.fitness for layer in layers for ind in layer.members]
    return GenerationStats(generation, best.fitness, float(np.mean(fits)), refreshed)


def _best_of(layers: list[AgeLayer]) -> Individual:
    return min((ind for layer in layers for ind in layer.members), key=lambda ind: ind.fitness)


def run_alps(cfg: AlpsConfig, X, y, on_birth: BirthHook | None = None,
             on_generation: Callable[[int, list[AgeLayer], bool], None] | None = None) -> AlpsResult:
    """Evolve a discriminant for labels y in {-1, +1}.

    The best individual ever seen is archived outside the layers, so the
    reported best MSE never gets worse. ``history[0]`` describes the initial
    random population.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.size == 0 or X.shape[0] != y.size:
        raise EmptyData("training data is empty or misaligned")
    layers = init_layers(cfg, X, y, on_birth)
    best = replace(_best_of(layers), program=list(_best_of(layers).program))
    history = [_stats(0, layers, best, False)]
    if on_generation:
        on_generation(0, layers, False)
    for gen in range(1, cfg.max_generations + 1):
        layers, refreshed = alps_step(layers, cfg, X, y, gen, on_birth)
        candidate = _best_of(layers)
        if candidate.fitness < best.fitness:
            best = replace(candidate, program=list(candidate.program))
        history.append(_stats(gen, layers, best, refreshed))
        if on_generation:
            on_generation(gen, layers, refreshed)
    return AlpsResult(best, history, layers)
