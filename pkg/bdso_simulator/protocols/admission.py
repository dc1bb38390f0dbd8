"""
Module for the admission filter of objects that only accept records requested by enough smart G-Set servers.
"""

import logging

from bdso_simulator.core.exceptions import UnauthorizedClientError
from bdso_simulator.core.process_id import ProcessId

logger = logging.getLogger()


class AdmissionFilter:
    """
    Admits a record only once f+1 distinct registered clients have requested it. With at most f Byzantine clients, an
    admitted record was requested by at least one correct client.
    """

    def __init__(self, authorized: list[ProcessId], f: int) -> None:
        """
        Initialise the `AdmissionFilter`.

        :param authorized: The registered clients, i.e. the servers of the smart G-Set.
        :param f: Maximum number of Byzantine registered clients.
        """
        self.authorized = set(authorized)
        self.f = f
        self._requesters: dict = {}

    def authorize(self, client: ProcessId) -> None:
        """
        Check that a client is registered.

        :param client: ID of the requesting client.
        :raises UnauthorizedClientError: If the client is not registered.
        """
        if client not in self.authorized:
            raise UnauthorizedClientError(f"Client '{client}' is not registered with this object")

    def target_admission(self, client: ProcessId, record) -> bool:
        """
        Record a request and decide whether the record is admitted.

        :param client: ID of the requesting client.
        :param record: The requested record.
        :raises UnauthorizedClientError: If the client is not registered.
        :return: Whether f+1 distinct registered clients have now requested the record.
        """
        self.authorize(client)
        requesters = self._requesters.setdefault(record, set())
        requesters.add(client)
        admitted = self.admits_requesters(requesters)
        logger.debug("Record requested by %d registered clients, admitted: %s", len(requesters), admitted)
        return admitted

    def admits_requesters(self, requesters: set[ProcessId]) -> bool:
        """
        Decide whether a set of requesters is enough to admit a record.

        :param requesters: The distinct clients that requested the record.
        :return: Whether at least f+1 of them are registered.
        """
        return len(requesters & self.authorized) >= self.f + 1
