from spatial.knn import KDTree, NeighborTable, brute_force_knn, build_knn

__all__ = ["KDTree", "NeighborTable", "brute_force_knn", "build_knn"]
