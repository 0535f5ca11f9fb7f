import heapq
import logging
from typing import List, Tuple

import numpy as np

from application.point_clouds.exceptions import EmptyIndexError, NeighborCountError
from core.types.base import frozen_array

logger = logging.getLogger(__name__)

LEAF_SIZE = 16
_LEAF = -1


class KdIndex:
    """
    Точный kd-tree над неизменяемым набором точек.

    Разбиение по медиане вдоль самой широкой оси, листья до LEAF_SIZE точек.
    При равных расстояниях побеждает меньший id - результат детерминирован.
    """

    def __init__(self, points: np.ndarray, leaf_size: int = LEAF_SIZE):
        self.points = frozen_array(points).reshape(-1, 3)
        if len(self.points) == 0:
            raise EmptyIndexError()
        self.leaf_size = leaf_size

        # Узлы хранятся плоскими списками; для листа split_dim == _LEAF
        self._split_dim: List[int] = []
        self._split_value: List[float] = []
        self._left: List[int] = []
        self._right: List[int] = []
        self._start: List[int] = []
        self._stop: List[int] = []

        self._order = np.arange(len(self.points))
        self._build(0, len(self.points))
        self._order.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    def _new_node(self) -> int:
        self._split_dim.append(_LEAF)
        self._split_value.append(0.0)
        self._left.append(_LEAF)
        self._right.append(_LEAF)
        self._start.append(0)
        self._stop.append(0)
        return len(self._split_dim) - 1

    def _build(self, start: int, stop: int) -> int:
        node = self._new_node()
        self._start[node] = start
        self._stop[node] = stop
        if stop - start <= self.leaf_size:
            return node

        ids = self._order[start:stop]
        coords = self.points[ids]
        extent = coords.max(axis=0) - coords.min(axis=0)
        dim = int(np.argmax(extent))
        mid = (stop - start) // 2
        partition = np.argpartition(coords[:, dim], mid)
        self._order[start:stop] = ids[partition]

        self._split_dim[node] = dim
        self._split_value[node] = float(self.points[self._order[start + mid], dim])
        left = self._build(start, start + mid)
        right = self._build(start + mid, stop)
        self._left[node] = left
        self._right[node] = right
        return node

    def knn(self, query: np.ndarray, k: int) -> List[Tuple[int, float]]:
        """k ближайших соседей: [(id, расстояние)] по возрастанию, при равенстве - по id"""
        if not 1 <= k <= len(self.points):
            raise NeighborCountError(
                message=f"k must be in [1, {len(self.points)}], got {k}",
                details={"k": k, "points": len(self.points)},
            )
        query = np.asarray(query, dtype=np.float64).reshape(3)

        # max-heap через отрицание: на вершине худший кандидат (d², id)
        heap: List[Tuple[float, int]] = []

        def worst() -> Tuple[float, int]:
            return -heap[0][0], -heap[0][1]

        stack: List[Tuple[int, float]] = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if len(heap) == k and bound > worst()[0]:
                continue

            dim = self._split_dim[node]
            if dim == _LEAF:
                ids = self._order[self._start[node] : self._stop[node]]
                diff = self.points[ids] - query
                dist2 = np.einsum("ij,ij->i", diff, diff)
                for d2, point_id in zip(dist2.tolist(), ids.tolist()):
                    candidate = (d2, point_id)
                    if len(heap) < k:
                        heapq.heappush(heap, (-d2, -point_id))
                    elif candidate < worst():
                        heapq.heapreplace(heap, (-d2, -point_id))
                continue

            delta = float(query[dim]) - self._split_value[node]
            near, far = (
                (self._left[node], self._right[node])
                if delta < 0.0
                else (self._right[node], self._left[node])
            )
            # Дальняя ветвь кладется первой, чтобы ближняя обрабатывалась раньше
            stack.append((far, max(bound, delta * delta)))
            stack.append((near, bound))

        result = sorted((-neg_d2, -neg_id) for neg_d2, neg_id in heap)
        return [(point_id, float(np.sqrt(d2))) for d2, point_id in result]

    def knn_ids(self, query: np.ndarray, k: int) -> np.ndarray:
        return np.array([point_id for point_id, _ in self.knn(query, k)], dtype=np.int64)


def build_index(points: np.ndarray) -> KdIndex:
    index = KdIndex(points)
    logger.debug("Spatial index built", extra={"points": len(index)})
    return index


def knn(index: KdIndex, query: np.ndarray, k: int) -> List[Tuple[int, float]]:
    return index.knn(query, k)
