import logging

import numpy as np

# networkx warning workaround (need only for Python 3.9)
import warnings
with warnings.catch_warnings():
    warnings.filterwarnings("ignore", message="networkx backend defined more than once: nx-loopback")
    import networkx as nx

from nuqkit.errors import PreconditionError

class MixingTopology(object):
    """
    Wrapper on networkx graph of workers together with gossip mixing matrix
    W used by decentralized runs.

    Node ``i`` of the graph is worker ``i``, an edge means that two workers
    exchange messages. W is validated upon construction: it must be
    symmetric, nonnegative, rows must sum to one, must vanish off the graph
    edges and its second largest eigenvalue modulus must be < 1.
    """
    def __init__(self, W, graph=None, label='custom', tolerance=1e-12):
        L = logging.getLogger(__name__)
        W = np.array(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or 0 == W.shape[0]:
            raise PreconditionError(f'Mixing matrix must be square, got shape {W.shape}')
        K = W.shape[0]
        if not np.all(np.isfinite(W)):
            raise PreconditionError('Mixing matrix has non-finite entries')
        if np.any(W < 0):
            raise PreconditionError('Mixing matrix has negative entries (W_ij >= 0 violated)')
        if not np.allclose(W, W.T, rtol=0, atol=tolerance):
            raise PreconditionError('Mixing matrix is not symmetric (W = W^T violated)')
        rowSums = W.sum(axis=1)
        if not np.allclose(rowSums, 1., rtol=0, atol=tolerance):
            raise PreconditionError('Mixing matrix rows do not sum to 1, max deviation'
                    f' {float(np.max(np.abs(rowSums - 1))):g}')
        if graph is None:
            graph = nx.Graph()
            graph.add_nodes_from(range(K))
            graph.add_edges_from((i, j) for i in range(K) for j in range(i + 1, K) if W[i, j] > 0)
        elif set(graph.nodes) != set(range(K)):
            raise PreconditionError(f'Topology graph nodes must be 0..{K - 1}')
        for i in range(K):
            for j in range(K):
                if i != j and W[i, j] > 0 and not graph.has_edge(i, j):
                    raise PreconditionError(f'Workers {i} and {j} mix (W_ij={W[i, j]:g})'
                            ' but are not connected in the topology graph')
        eigs = np.sort(np.abs(np.linalg.eigvalsh((W + W.T)/2)))[::-1]
        self._rho = float(eigs[1]) if K > 1 else 0.
        if not self._rho < 1. - tolerance:
            raise PreconditionError('Second largest eigenvalue modulus of mixing matrix'
                    f' is {self._rho:.6g} (< 1 violated)')
        self._W = W
        self._W.flags.writeable = False
        self.g = graph
        self._label = label
        L.debug(f'Topology "{label}" of {K} workers, {graph.number_of_edges()} links,'
                f' second eigenvalue modulus {self._rho:.4g}')

    @property
    def W(self):
        return self._W

    @property
    def K(self):
        return self._W.shape[0]

    @property
    def label(self):
        return self._label

    @property
    def rho(self):
        """Second largest eigenvalue modulus of W."""
        return self._rho

    @property
    def spectral_gap(self):
        return 1. - self._rho

    def neighbours(self, i):
        """Returns list of (j, W_ij) with nonzero weight, ``i`` included."""
        return [(j, float(self._W[i, j])) for j in range(self.K) if self._W[i, j] > 0]

    def to_dict(self):
        return { 'label': self._label
               , 'K': self.K
               , 'edges': sorted([min(e), max(e)] for e in self.g.edges)
               , 'rho': self._rho
               }

    def __repr__(self):
        return f'MixingTopology({self._label!r}, K={self.K})'

#                       * * *   * * *   * * *

def ring_topology(K):
    """
    Ring of K workers: self weight 1/2, each of two neighbours 1/4 (for K
    <= 2 coinciding weights are summed).
    """
    if K < 1:
        raise PreconditionError(f'Number of workers must be >= 1, got {K}')
    W = np.zeros((K, K))
    for i in range(K):
        W[i, i] += .5
        W[i, (i + 1) % K] += .25
        W[i, (i - 1) % K] += .25
    return MixingTopology(W, graph=nx.cycle_graph(K) if K > 2 else nx.complete_graph(K),
            label='ring')

def complete_topology(K):
    """Complete averaging, W = (1/K) ones."""
    if K < 1:
        raise PreconditionError(f'Number of workers must be >= 1, got {K}')
    return MixingTopology(np.full((K, K), 1./K), graph=nx.complete_graph(K), label='complete')

def metropolis_topology(graph, label='metropolis'):
    """
    Metropolis-Hastings weights W_ij = 1/(1 + max(deg i, deg j)) of an
    arbitrary connected undirected networkx graph with nodes 0..K-1.
    """
    if not nx.is_connected(graph):
        raise PreconditionError('Topology graph must be connected')
    K = graph.number_of_nodes()
    W = np.zeros((K, K))
    for i, j in graph.edges:
        if i == j: continue
        W[i, j] = W[j, i] = 1./(1 + max(graph.degree[i], graph.degree[j]))
    W[np.diag_indices(K)] = 1. - W.sum(axis=1)
    return MixingTopology(W, graph=graph, label=label)

def instantiate_topology(name, K):
    if name.lower() in ('ring', 'cycle'):
        return ring_topology(K)
    if name.lower() in ('complete', 'all', 'full'):
        return complete_topology(K)
    if name.lower() in ('star',):
        return metropolis_topology(nx.star_graph(K - 1), label='star')
    raise KeyError(name)
