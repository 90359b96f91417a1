"""crossdb: an embedded multi-model database engine.

Relational tables, JSON document collections, and labeled property
graphs live in one store; queries join across models around graph
pattern matching, and analytical operators (matrix product, cosine
similarity, logistic regression) run in-engine over materialized query
results.
"""

from .analytics import Matrix, RegressionParams, cosine_similarity, logistic_regression, multiply
from .cost import CostConstants
from .database import Database
from .errors import (
    EngineError,
    ExecutionError,
    NotFoundError,
    QuerySyntaxError,
    SchemaError,
    StorageError,
)
from .executor import QueryResult
from .optimizer import OptimizerOptions

__all__ = [
    "CostConstants",
    "Database",
    "EngineError",
    "ExecutionError",
    "Matrix",
    "NotFoundError",
    "OptimizerOptions",
    "QueryResult",
    "QuerySyntaxError",
    "RegressionParams",
    "SchemaError",
    "StorageError",
    "cosine_similarity",
    "logistic_regression",
    "multiply",
]

__version__ = "0.1.0"
