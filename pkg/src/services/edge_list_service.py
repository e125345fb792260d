"""
Edge List Service
Reads interference graphs from CSV edge lists
"""

import os
from typing import List, Optional

import pandas as pd

from src.graph_core import AdjacencyMatrix, load_edge_list
from src.services.data_service import DataService
from src.utils.errors import DataError

# Try to import logger
try:
    from src.utils.logger import logger
except ImportError:
    import logging
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())


class EdgeListService:
    """Service for edge-list files (header src,dst[,weight]) and nodes.csv label files"""

    REQUIRED_COLUMNS = ("src", "dst")

    def __init__(self, data_service: Optional[DataService] = None):
        self.data_service = data_service or DataService()

    def read_labels(self, nodes_path: str) -> List[str]:
        """Read the ordered node labels from a nodes.csv with header 'label'"""
        frame = self.data_service.read_table(nodes_path)
        if "label" not in frame.columns:
            raise DataError(f"{nodes_path}: nodes file needs a 'label' column")
        labels = [str(v).strip() for v in frame["label"]]
        if any(label == "" for label in labels):
            position = labels.index("")
            raise DataError(f"{nodes_path}: empty label", line=position + 2)
        return labels

    def read_edge_list(
        self,
        path: str,
        directed: bool = False,
        transpose: bool = False,
        n_hint: Optional[int] = None,
        nodes_path: Optional[str] = None,
    ) -> AdjacencyMatrix:
        """
        Load one graph
        
        Args:
            path: Edge-list CSV
            directed: Records are one-way
            transpose: File is stored influencer first
            n_hint: Node count for integer-indexed files
            nodes_path: Companion nodes.csv for string labels
            
        Returns:
            AdjacencyMatrix
        """
        frame = self.data_service.read_table(path, allow_empty=True)
        if frame.empty and len(frame.columns) == 0:
            frame = pd.DataFrame(columns=list(self.REQUIRED_COLUMNS))
        missing = [c for c in self.REQUIRED_COLUMNS if c not in frame.columns]
        if missing:
            raise DataError(f"{path}: edge list needs columns src,dst[,weight]; missing {', '.join(missing)}")

        labels = self.read_labels(nodes_path) if nodes_path else None
        records = frame.to_dict("records")
        graph = load_edge_list(
            records,
            directed=directed,
            n_hint=n_hint,
            labels=labels,
            transpose=transpose,
            first_line=2,
        )
        logger.info(
            f"Loaded graph {os.path.basename(path)}: n={graph.n}, "
            f"{graph.nnz} nonzero weights, {'directed' if directed else 'undirected'}"
        )
        return graph
