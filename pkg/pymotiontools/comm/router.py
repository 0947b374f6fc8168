"This module contains the class router"

import numpy as np

int32_limit = np.int64(2**31 - 1)


class Router:
    """
    This class splits work items among the ranks of a communicator and collects results back.

    Work is always split with the same linearly load balanced partition, so gathering
    the per-rank pieces rank by rank restores the original item order.

    Parameters
    ----------
    comm : MPI communicator
        The MPI communicator that is used for the communication.

    Attributes
    ----------
    comm : MPI communicator
        The MPI communicator that is used for the communication.

    Notes
    -----
    Arrays are flattened before they are sent. The user must reshape the received data.

    Examples
    --------
    To initialize simply use the communicator

    >>> from mpi4py import MPI
    >>> from pymotiontools.comm.router import Router
    >>> comm = MPI.COMM_WORLD
    >>> rt = Router(comm)
    >>> start, count = rt.partition(10)
    """

    def __init__(self, comm):

        self.comm = comm

    def partition(self, m: int):
        """
        Range of items this rank owns out of m items.

        Rank r receives floor((m + P - r - 1) / P) items, and the offset is the
        exclusive prefix sum of the counts of lower ranks.

        Parameters
        ----------
        m : int
            Total number of items.

        Returns
        -------
        start : int
            Index of the first local item.
        count : int
            Number of local items.
        """

        pe_rank = self.comm.Get_rank()
        pe_size = self.comm.Get_size()
        count = int((m + pe_size - pe_rank - 1) // pe_size)
        start = self.comm.scan(count) - count

        return start, count

    def local_slice(self, items: list):
        """Return the part of a list that this rank owns."""

        start, count = self.partition(len(items))
        return items[start : start + count]

    def gather_objects(self, local_items: list):
        """
        Gather python objects from every rank on every rank, preserving rank order.

        Parameters
        ----------
        local_items : list
            Items produced locally, in local order.

        Returns
        -------
        list
            Concatenation of the lists of rank 0, 1, ... in that order.
        """

        gathered = self.comm.allgather(local_items)
        return [item for rank_items in gathered for item in rank_items]

    def all_gather(self, data=None, dtype=None):
        """
        Gathers data from all processes to all processes.

        This is a wrapper to the MPI Allgatherv function.

        Parameters
        ----------
        data : ndarray
            Data that is gathered in all processes.
        dtype : dtype
            The data type of the data that is gathered.

        Returns
        -------
        recvbuf : ndarray
            The gathered data, flattened. User must reshape it.
        sendcounts : ndarray
            The number of data that was sent from each rank.

        Examples
        --------
        >>> rt = Router(comm)
        >>> local_errors = np.ones((n_local_windows, 6))
        >>> recvbf, sendcounts = rt.all_gather(data=local_errors, dtype=np.double)
        >>> errors = recvbf.reshape(-1, 6)
        """

        data = np.ascontiguousarray(data, dtype=dtype).flatten()
        count = data.size

        sendcounts = np.array(self.comm.allgather(count), dtype=np.int64)

        check_sendrecv_counts(self.comm, sendcounts)

        recvbuf = np.empty(np.sum(sendcounts), dtype=dtype)

        self.comm.Allgatherv(sendbuf=data, recvbuf=(recvbuf, sendcounts))

        return recvbuf, sendcounts


def check_sendrecv_counts(comm, sendrecv_count: np.ndarray):
    """Raise if a message count does not fit in an MPI int32 count."""

    if np.any(sendrecv_count >= int32_limit):
        raise ValueError(
            "Send/Recv sendcount is too large for a single send according to MPI standard (max int32 = 2**31 -1 counts), use more ranks"
        )
    elif np.any(sendrecv_count < 0):
        raise ValueError(
            "Send/Recv sendcount cannot be negative, you might have overflowed the int32 limit"
        )
