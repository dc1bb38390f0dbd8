"""
Module for the simulated authentication scheme and content digests.

Every process owns an HMAC key derived from the run seed. Only the simulator holds the keys and it only signs on behalf
of the process whose handle is used, so a tag can verify only if that process really signed that payload.
"""

import logging
from functools import lru_cache

from cryptography.hazmat.primitives import hashes, hmac

from bdso_simulator.core.consts import DIGEST_BYTES
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.models.envelope import AuthTag

logger = logging.getLogger()


@lru_cache(maxsize=1 << 16)
def content_digest(payload: bytes) -> int:
    """
    Compute the 64 bit content digest of a payload.

    :param payload: The bytes to digest.
    :return: The first 8 bytes of the SHA-256 digest as an unsigned integer.
    """
    digest = hashes.Hash(hashes.SHA256())
    digest.update(payload)
    return int.from_bytes(digest.finalize()[:DIGEST_BYTES], "big")


class Authenticator:
    """
    Issues and verifies `AuthTag`s for the processes of one simulation run.
    """

    def __init__(self, seed: int) -> None:
        """
        Initialise the `Authenticator` for a run.

        :param seed: Seed of the run, from which every per process key is derived.
        """
        self._seed = seed
        self._keys: dict[ProcessId, bytes] = {}
        self._issued: set[tuple[ProcessId, int]] = set()
        # HMAC of every (signer, payload) pair computed so far
        self._fingerprints: dict[tuple[ProcessId, bytes], int] = {}

    def signer_for(self, process_id: ProcessId) -> "Signer":
        """
        Create the signing handle of a process.

        :param process_id: The process the handle signs as.
        :return: A `Signer` bound to the process.
        """
        return Signer(self, process_id)

    def verify(self, tag: AuthTag, payload: bytes) -> bool:
        """
        Verify that a tag was issued by its claimed signer over exactly this payload.

        :param tag: The tag to verify.
        :param payload: The payload the tag is claimed to cover.
        :return: Whether the tag is authentic.
        """
        fingerprint = self._fingerprint(tag.signer, payload)
        return fingerprint == tag.digest and (tag.signer, fingerprint) in self._issued

    def matches(self, tag: AuthTag, payload: bytes) -> bool:
        """
        Check a tag against the signer's key alone, without the record of issued tags. Used to re-check a stored
        trace with a fresh authenticator built from the same seed.

        :param tag: The tag to check.
        :param payload: The payload the tag is claimed to cover.
        :return: Whether the tag is the signer's tag over the payload.
        """
        return self._fingerprint(tag.signer, payload) == tag.digest

    @property
    def issued_count(self) -> int:
        """Number of distinct (signer, payload) pairs signed so far."""
        return len(self._issued)

    def _sign(self, process_id: ProcessId, payload: bytes) -> AuthTag:
        fingerprint = self._fingerprint(process_id, payload)
        self._issued.add((process_id, fingerprint))
        return AuthTag(signer=process_id, digest=fingerprint)

    def _key(self, process_id: ProcessId) -> bytes:
        key = self._keys.get(process_id)
        if key is None:
            digest = hashes.Hash(hashes.SHA256())
            digest.update(f"{self._seed}:{process_id}".encode())
            key = digest.finalize()
            self._keys[process_id] = key
        return key

    def _fingerprint(self, process_id: ProcessId, payload: bytes) -> int:
        key = (process_id, payload)
        fingerprint = self._fingerprints.get(key)
        if fingerprint is None:
            mac = hmac.HMAC(self._key(process_id), hashes.SHA256())
            mac.update(payload)
            fingerprint = int.from_bytes(mac.finalize()[:DIGEST_BYTES], "big")
            self._fingerprints[key] = fingerprint
        return fingerprint


class Signer:
    """
    Handle allowing a single process to sign payloads as itself.
    """

    def __init__(self, authenticator: Authenticator, process_id: ProcessId) -> None:
        """
        Initialise the `Signer`.

        :param authenticator: The run's authenticator.
        :param process_id: The process this handle signs as.
        """
        self._authenticator = authenticator
        self.process_id = process_id

    def sign(self, payload: bytes) -> AuthTag:
        """
        Sign a payload as the bound process.

        :param payload: The payload to sign.
        :return: The issued tag.
        """
        return self._authenticator._sign(self.process_id, payload)  # pylint: disable=protected-access
