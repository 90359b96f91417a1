"""Dense matrices and block-parallel analytical kernels.

Matrices are dense row-major float64. Kernels partition work into tiles
or row blocks scheduled over a thread pool; accumulation order inside
every tile is fixed (ascending k / ascending block index), so results
are bit-identical regardless of worker count, and matrix products are
bit-identical to a sequential scalar reference.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ExecutionError
from .model import K_DOCUMENTS
from .predicates import bind_to_schema, eval_predicate

DEFAULT_TILE = 64
GRADIENT_BLOCK_ROWS = 256


class Matrix:
    """Dense row-major float64 matrix with optional row/column labels."""

    def __init__(self, data, row_labels=None, col_labels=None):
        arr = np.array(data, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 1:
            arr = arr.reshape((arr.shape[0], 1)) if arr.size else arr.reshape((0, 0))
        if arr.ndim != 2:
            raise ContractError(f"matrix data must be 2-dimensional, got {arr.ndim}")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ContractError("matrix entries must be finite")
        self.data = arr
        self.row_labels = list(row_labels) if row_labels is not None else None
        self.col_labels = list(col_labels) if col_labels is not None else None

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def nbytes(self):
        return self.data.nbytes

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            if self.col_labels:
                fh.write(",".join(str(c) for c in self.col_labels) + "\n")
            for i in range(self.rows):
                fh.write(",".join(repr(v) for v in self.data[i]) + "\n")


def _numeric_cell(v, where):
    if v is None:
        raise ExecutionError(f"{where}: Null cell cannot enter a matrix")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ExecutionError(f"{where}: non-numeric value {v!r}")
    return float(v)


def rel2matrix(source, columns=None):
    """Batch-copy numeric columns into a matrix, one row per record.

    `source` is a collection (rows read directly off the store, no
    operator pull; row labels are tids) or a query result.
    """
    if hasattr(source, "schema"):  # a collection
        schema = source.schema
        if schema.kind == K_DOCUMENTS:
            raise ContractError("document collections need gather_matrix, not rel2matrix")
        names = columns if columns is not None else schema.column_names()
        idx = [schema.column_index(n) for n in names]
        rows, labels = [], []
        for record in source.iter_live():
            rows.append(
                [_numeric_cell(record.values[i], f"{schema.name}.{names[k]}") for k, i in enumerate(idx)]
            )
            labels.append(record.tid)
        data = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(idx)))
        return Matrix(data, row_labels=labels, col_labels=list(names))
    # query result
    names = columns if columns is not None else list(source.columns)
    idx = []
    for n in names:
        if n not in source.columns:
            raise ContractError(f"no column {n!r} in the result")
        idx.append(source.columns.index(n))
    rows = [
        [_numeric_cell(row[i], names[k]) for k, i in enumerate(idx)]
        for row in source.rows
    ]
    data = np.array(rows, dtype=np.float64) if rows else np.zeros((0, len(idx)))
    return Matrix(data, col_labels=list(names))


def gather_matrix(collection, pred, array_column, pad=False):
    """One matrix row per record passing pred, from a numeric-array column.

    Ragged arrays are an error unless pad is set, which zero-extends
    short rows to the longest one.
    """
    schema = collection.schema
    col = schema.column_index(array_column)
    bound = bind_to_schema(pred, schema) if pred is not None else None
    rows, labels = [], []
    for record in collection.scan():
        if bound is not None and not eval_predicate(bound, record):
            continue
        value = record.values[col]
        if not isinstance(value, list):
            raise ExecutionError(f"{schema.name}.{array_column}: not an array: {value!r}")
        rows.append([_numeric_cell(v, f"{schema.name}.{array_column}") for v in value])
        labels.append(record.tid)
    if not rows:
        return Matrix(np.zeros((0, 0)), row_labels=[])
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        if not pad:
            raise ExecutionError(
                f"{schema.name}.{array_column}: ragged array lengths {sorted(widths)}"
            )
        width = max(widths)
        rows = [r + [0.0] * (width - len(r)) for r in rows]
    return Matrix(np.array(rows, dtype=np.float64), row_labels=labels)


def _pool_map(fn, tasks, workers):
    if workers <= 1:
        for t in tasks:
            fn(t)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fn, tasks))  # the list() is the join barrier


def multiply(x, y, workers=1, tile=DEFAULT_TILE):
    """Z = X @ Y over independently scheduled (i, j) tiles.

    Each output cell accumulates its products strictly left to right in
    k (an axis-0 cumsum), making the result bit-identical to a scalar
    triple loop and independent of the worker count.
    """
    if x.cols != y.rows:
        raise ContractError(f"dimension mismatch: {x.rows}x{x.cols} @ {y.rows}x{y.cols}")
    a, b = x.data, y.data
    out = np.zeros((x.rows, y.cols), dtype=np.float64)
    if x.rows == 0 or y.cols == 0:
        return Matrix(out, row_labels=x.row_labels, col_labels=y.col_labels)
    tiles = [
        (i0, min(i0 + tile, x.rows), j0, min(j0 + tile, y.cols))
        for i0 in range(0, x.rows, tile)
        for j0 in range(0, y.cols, tile)
    ]

    def run(t):
        i0, i1, j0, j1 = t
        ytile = b[:, j0:j1]
        if a.shape[1] == 0:
            return
        for i in range(i0, i1):
            prods = a[i, :, None] * ytile  # k by jw, exact IEEE products
            out[i, j0:j1] = np.cumsum(prods, axis=0)[-1]

    _pool_map(run, tiles, workers)
    return Matrix(out, row_labels=x.row_labels, col_labels=y.col_labels)


def cosine_similarity(x, y, workers=1, tile=DEFAULT_TILE):
    """S[i, j] = <x_i, y_j> / (|x_i| |y_j|); zero-norm rows score 0."""
    if x.cols != y.cols:
        raise ContractError(f"row width mismatch: {x.cols} vs {y.cols}")
    a, b = x.data, y.data
    out = np.zeros((x.rows, y.rows), dtype=np.float64)
    if x.rows == 0 or y.rows == 0:
        return Matrix(out)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    an = np.divide(a, na[:, None], out=np.zeros_like(a), where=na[:, None] > 0)
    bn = np.divide(b, nb[:, None], out=np.zeros_like(b), where=nb[:, None] > 0)
    tiles = [
        (i0, min(i0 + tile, x.rows), j0, min(j0 + tile, y.rows))
        for i0 in range(0, x.rows, tile)
        for j0 in range(0, y.rows, tile)
    ]

    def run(t):
        i0, i1, j0, j1 = t
        out[i0:i1, j0:j1] = an[i0:i1] @ bn[j0:j1].T

    _pool_map(run, tiles, workers)
    return Matrix(out, row_labels=x.row_labels)


@dataclass
class RegressionParams:
    learning_rate: float = 0.1
    max_iterations: int = 100
    tolerance: float = 1e-6
    l2: float = 0.0
    standardize: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractError("learning rate must be positive")
        if self.max_iterations < 1:
            raise ContractError("iteration budget must be >= 1")
        if self.tolerance < 0:
            raise ContractError("tolerance must be >= 0")


@dataclass
class RegressionResult:
    weights: np.ndarray  # feature weights then the intercept, cols+1 long
    loss: float
    losses: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def logloss_and_gradient(xdata, yvec, w, intercept, l2, workers=1,
                         block=GRADIENT_BLOCK_ROWS):
    """Mean log-loss and its gradient, summed blockwise in fixed order.

    Blocks may be evaluated in parallel but are combined by ascending
    block index, so the result does not depend on the worker count.
    """
    n = xdata.shape[0]
    starts = list(range(0, n, block))
    partials = [None] * len(starts)

    def run(kth):
        lo = starts[kth]
        hi = min(lo + block, n)
        xb = xdata[lo:hi]
        yb = yvec[lo:hi]
        z = xb @ w + intercept
        p = _sigmoid(z)
        d = p - yb
        # stable per-row loss: max(z,0) - z*y + log(1+exp(-|z|))
        losses = np.maximum(z, 0.0) - z * yb + np.log1p(np.exp(-np.abs(z)))
        partials[kth] = (xb.T @ d, d.sum(), losses.sum())

    _pool_map(run, range(len(starts)), workers)
    gw = np.zeros_like(w)
    gb = 0.0
    total_loss = 0.0
    for part in partials:
        gw = gw + part[0]
        gb = gb + part[1]
        total_loss = total_loss + part[2]
    gw = gw / n + l2 * w
    gb = gb / n
    loss = total_loss / n + 0.5 * l2 * float(w @ w)
    return loss, gw, gb


def logistic_regression(x, y, params=None, workers=1):
    """Batch gradient descent on mean log-loss with a sigmoid link.

    y entries must be 0/1. Returns feature weights plus intercept (the
    intercept is the last component) and the loss trace.
    """
    params = params or RegressionParams()
    yvec = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.rows == 0:
        raise ContractError("regression needs at least one row")
    if x.rows != yvec.shape[0]:
        raise ContractError(f"feature rows {x.rows} != label count {yvec.shape[0]}")
    if not np.all((yvec == 0.0) | (yvec == 1.0)):
        raise ContractError("labels must be 0 or 1")
    xdata = x.data
    if params.standardize and x.cols:
        mean = xdata.mean(axis=0)
        std = xdata.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        xdata = (xdata - mean) / std
    w = np.zeros(x.cols, dtype=np.float64)
    intercept = 0.0
    losses = []
    converged = False
    iterations = 0
    for _ in range(params.max_iterations):
        loss, gw, gb = logloss_and_gradient(xdata, yvec, w, intercept, params.l2, workers)
        losses.append(loss)
        iterations += 1
        gnorm = float(np.sqrt(gw @ gw + gb * gb))
        if gnorm < params.tolerance:
            converged = True
            break
        w = w - params.learning_rate * gw
        intercept = intercept - params.learning_rate * gb
    final_loss, _, _ = logloss_and_gradient(xdata, yvec, w, intercept, params.l2, workers)
    losses.append(final_loss)
    return RegressionResult(
        weights=np.concatenate([w, [intercept]]),
        loss=final_loss,
        losses=losses,
        iterations=iterations,
        converged=converged,
    )
