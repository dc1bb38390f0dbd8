"""
Module for defining the schema of scenario files.
"""

from bdso_simulator.core.compat import StrEnum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, Field, ValidationError, ValidationInfo, model_validator

from bdso_simulator.core.config import SchedulerPolicy, config
from bdso_simulator.core.consts import MAX_RECORD_PAYLOAD_BYTES, SCENARIOS_DIRECTORY_NAME
from bdso_simulator.core.exceptions import ConfigInvalidError, InsufficientServersError
from bdso_simulator.core.process_id import ProcessId, Role, server_ids
from bdso_simulator.models.record import AtomicRequestRecord, Record


class ObjectKind(StrEnum):
    """
    Enumeration for the kinds of replicated object a scenario can instantiate.
    """

    BRB = "brb"
    BDSO = "bdso"
    SBDSO = "sbdso"
    SWBDLO = "swbdlo"
    LEDGER_STUB = "ledger_stub"


class AdmissionMode(StrEnum):
    """
    Enumeration for who may get records admitted into an object.
    """

    OPEN = "open"
    # Only the servers of the `admission_from` object are accepted, and only once f+1 of them ask for the same record
    RESTRICTED = "restricted"


class ServerSelection(StrEnum):
    """
    Enumeration for how clients pick the servers they contact.
    """

    RANDOM = "random"
    FIXED_PREFIX = "fixed_prefix"


class PrefixFilter(StrEnum):
    """
    Enumeration for how a single-writer ledger get turns the records it collected into a sequence.
    """

    CLOSURE = "closure"
    LITERAL = "literal"


class OperationKind(StrEnum):
    """
    Enumeration for the operations a client can invoke.
    """

    GET = "get"
    ADD = "add"
    APPEND = "append"
    ATOMIC_APPENDS = "atomic_appends"
    ATOMIC_ADDS = "atomic_adds"
    BROADCAST = "broadcast"


class AdversaryKind(StrEnum):
    """
    Enumeration for the Byzantine behaviours that can replace a correct process.
    """

    CRASH_SILENT = "CrashSilent"
    STALE_RESPONDER = "StaleResponder"
    SPURIOUS_SET = "SpuriousSet"
    EQUIVOCATING_BRB_ORIGIN = "EquivocatingBrbOrigin"
    SPURIOUS_PROPAGATOR = "SpuriousPropagator"
    INDEX_EQUIVOCATING_WRITER = "IndexEquivocatingWriter"
    SILENT_ATOMIC_PARTNER = "SilentAtomicPartner"
    FORGE_ATTEMPTER = "ForgeAttempter"


OPERATIONS_BY_OBJECT_KIND = {
    ObjectKind.BRB: {OperationKind.BROADCAST},
    ObjectKind.BDSO: {OperationKind.GET, OperationKind.ADD},
    ObjectKind.SBDSO: {OperationKind.GET, OperationKind.ADD, OperationKind.ATOMIC_APPENDS, OperationKind.ATOMIC_ADDS},
    ObjectKind.SWBDLO: {OperationKind.GET, OperationKind.APPEND},
    ObjectKind.LEDGER_STUB: set(),
}

ATOMIC_TARGET_KINDS = {
    OperationKind.ATOMIC_APPENDS: ObjectKind.LEDGER_STUB,
    OperationKind.ATOMIC_ADDS: ObjectKind.BDSO,
}


class ObjectSpec(BaseModel):
    """
    Schema model for one replicated object of a scenario.
    """

    id: str = Field(min_length=1)
    kind: ObjectKind
    n: Optional[int] = Field(default=None, ge=1)
    f: Optional[int] = Field(default=None, ge=0)
    mode: AdmissionMode = AdmissionMode.OPEN
    admission_from: Optional[str] = None
    writer: Optional[ProcessId] = None
    prefix_filter: PrefixFilter = PrefixFilter.CLOSURE
    selection: ServerSelection = ServerSelection.RANDOM
    # Overrides the insertion threshold of the protocol, only meant for mutation studies
    insert_threshold: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def validate_kind_fields(self) -> "ObjectSpec":
        """
        Validator checking that the kind specific fields are present exactly when the kind needs them.

        :raises ValueError: If a kind specific field is missing or misplaced.
        :return: The validated model.
        """
        if self.kind == ObjectKind.SWBDLO and self.writer is None:
            raise ValueError(f"Object '{self.id}' is a single-writer ledger and must name its writer")
        if self.kind != ObjectKind.SWBDLO and self.writer is not None:
            raise ValueError(f"Object '{self.id}' is not a single-writer ledger and cannot name a writer")
        if self.writer is not None and self.writer.role != Role.CLIENT:
            raise ValueError(f"The writer of object '{self.id}' must be a client")
        if self.mode == AdmissionMode.RESTRICTED:
            if self.kind not in (ObjectKind.BDSO, ObjectKind.LEDGER_STUB):
                raise ValueError(f"Object '{self.id}' of kind '{self.kind}' cannot use restricted admission")
            if self.admission_from is None:
                raise ValueError(f"Restricted object '{self.id}' must name the object it admits requests from")
        return self


class AdversaryAssignment(BaseModel):
    """
    Schema model assigning a Byzantine behaviour to a process.
    """

    process: ProcessId
    kind: AdversaryKind
    params: dict[str, Any] = {}


class WorkloadOperation(BaseModel):
    """
    Schema model for a single scripted client operation.
    """

    client: ProcessId
    object: str
    op: OperationKind
    payload: Optional[str] = Field(default=None, min_length=1)
    target: Optional[str] = None
    partner: Optional[ProcessId] = None
    counterpart: Optional[str] = Field(default=None, min_length=1)
    # Server asked to perform a broadcast, defaults to the first server of the object
    via: Optional[ProcessId] = None

    @model_validator(mode="after")
    def validate_arguments(self) -> "WorkloadOperation":
        """
        Validator checking that the operation carries the arguments its kind needs.

        :raises ValueError: If an argument is missing or a payload does not fit in a record.
        :return: The validated model.
        """
        if self.client.role != Role.CLIENT:
            raise ValueError(f"Operations must be invoked by clients, not '{self.client}'")
        if self.op != OperationKind.GET and self.payload is None:
            raise ValueError(f"Operation '{self.op}' requires a payload")
        for name, value in (("payload", self.payload), ("counterpart", self.counterpart)):
            if value is not None and len(value.encode()) > MAX_RECORD_PAYLOAD_BYTES:
                raise ValueError(f"The {name} of '{self.op}' exceeds {MAX_RECORD_PAYLOAD_BYTES} bytes")
        if self.op in ATOMIC_TARGET_KINDS:
            if self.target is None or self.partner is None or self.counterpart is None:
                raise ValueError(f"Operation '{self.op}' requires a target, a partner and a counterpart")
            if self.partner == self.client or self.partner.role != Role.CLIENT:
                raise ValueError("The partner of an atomic operation must be another client")
            # Both records travel inside the request, which is itself the payload of one smart G-Set record
            size = len(self.atomic_request().encode())
            if size > MAX_RECORD_PAYLOAD_BYTES:
                raise ValueError(
                    f"The encoded '{self.op}' request takes {size} bytes, more than {MAX_RECORD_PAYLOAD_BYTES}"
                )
        return self

    @property
    def payload_bytes(self) -> bytes:
        """The payload encoded as UTF-8."""
        return self.payload.encode()

    def atomic_request(self) -> AtomicRequestRecord:
        """
        Build the request of the invoking client described by an atomic appends or atomic adds operation.

        :return: The request.
        """
        return AtomicRequestRecord(
            requester=self.client,
            group=(self.client, self.partner),
            own_record=Record(creator=self.client, payload=self.payload_bytes),
            target=self.target,
            counterpart_record=Record(creator=self.partner, payload=self.counterpart.encode()),
        )


class RandomWorkload(BaseModel):
    """
    Schema model for a seeded random workload on one object.
    """

    object: str
    # Defaults to every client of the scenario
    clients: Optional[list[ProcessId]] = None
    adds_per_client: int = Field(default=0, ge=0)
    gets_per_client: int = Field(default=0, ge=0)
    # When set, each client instead runs a random mix of adds and gets of random length up to this bound
    max_operations: Optional[int] = Field(default=None, ge=1)


class FinalGets(BaseModel):
    """
    Schema model for gets issued once the network is quiescent after the main workload.
    """

    object: str
    clients: Optional[list[ProcessId]] = None
    per_client: int = Field(default=1, ge=1)


class Workload(BaseModel):
    """
    Schema model for the workload of a scenario.
    """

    script: list[WorkloadOperation] = []
    random: list[RandomWorkload] = []
    final_gets: list[FinalGets] = []
    # Only invoke an operation while no message is in flight, producing sequential histories
    settle_between_ops: bool = False


class AtomicPair(BaseModel):
    """
    Schema model for an atomic pair declared by two mirrored scripted operations.
    """

    kind: OperationKind
    sbdso: str
    p: ProcessId
    q: ProcessId
    record_p: Record
    target_p: str
    record_q: Record
    target_q: str


class ScenarioConfig(BaseModel):
    """
    Schema model for a scenario file.
    """

    name: str = Field(min_length=1)
    n: int = Field(default=4, ge=1)
    f: int = Field(default=1, ge=0)
    clients: int = Field(default=1, ge=0)
    objects: list[ObjectSpec] = Field(min_length=1)
    adversaries: list[AdversaryAssignment] = []
    workload: Workload = Workload()
    seed: int = Field(default=0, ge=0)
    step_limit: Optional[int] = Field(default=None, gt=0)
    policy: Optional[SchedulerPolicy] = None
    strict_bounds: Optional[bool] = None
    fairness_multiplier: Optional[int] = Field(default=None, gt=0)
    properties: list[str] = []

    @model_validator(mode="after")
    def validate_scenario(self, info: ValidationInfo) -> "ScenarioConfig":
        """
        Validator resolving per object defaults and checking the scenario is internally consistent.

        A `strict_bounds` value passed in the validation context takes precedence over the one in the file, which takes
        precedence over the configured default.

        :param info: Validation info from pydantic.
        :raises ValueError: If the scenario references unknown processes or objects or misuses an operation.
        :raises InsufficientServersError: If an object has too few servers for its `f`.
        :return: The validated model.
        """
        ids = [spec.id for spec in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("Object ids must be unique")

        for spec in self.objects:
            if spec.kind == ObjectKind.LEDGER_STUB:
                spec.n = 1 if spec.n is None else spec.n
                spec.f = 0 if spec.f is None else spec.f
            else:
                spec.n = self.n if spec.n is None else spec.n
                spec.f = self.f if spec.f is None else spec.f

        # Pinned so that the scenario embedded in a trace validates the same way when read back
        self.strict_bounds = self._resolve_strict_bounds(info)
        self._validate_bounds(self.strict_bounds)
        self._validate_references()
        self._validate_adversaries()
        self._validate_workload()
        return self

    def _resolve_strict_bounds(self, info: ValidationInfo) -> bool:
        if info.context and info.context.get("strict_bounds") is not None:
            return info.context["strict_bounds"]
        if self.strict_bounds is not None:
            return self.strict_bounds
        return config.simulator.strict_bounds

    def _validate_bounds(self, strict_bounds: bool) -> None:
        for spec in self.objects:
            if spec.kind == ObjectKind.SWBDLO and spec.n < 4 * spec.f + 1:
                raise InsufficientServersError(
                    f"Object '{spec.id}': n >= 4f+1 violated (n={spec.n}, f={spec.f})"
                )
            if (
                strict_bounds
                and spec.kind in (ObjectKind.BRB, ObjectKind.BDSO, ObjectKind.SBDSO)
                and spec.n < 3 * spec.f + 1
            ):
                raise InsufficientServersError(
                    f"Object '{spec.id}': n >= 3f+1 violated (n={spec.n}, f={spec.f})"
                )

    def _validate_references(self) -> None:
        for spec in self.objects:
            if spec.admission_from is not None:
                source = self.find_object(spec.admission_from)
                if source is None or source.kind != ObjectKind.SBDSO:
                    raise ValueError(f"Object '{spec.id}' must admit requests from a smart G-Set")
            if spec.writer is not None and spec.writer.index >= self.clients:
                raise ValueError(f"Writer '{spec.writer}' of object '{spec.id}' is not a client of the scenario")

    def _validate_adversaries(self) -> None:
        processes = [assignment.process for assignment in self.adversaries]
        if len(set(processes)) != len(processes):
            raise ValueError("A process can only be assigned one adversary")
        blocks = self.server_blocks()
        all_servers = {server for block in blocks.values() for server in block}
        for process_id in processes:
            if process_id.role == Role.SERVER and process_id not in all_servers:
                raise ValueError(f"Adversary process '{process_id}' is not a server of the scenario")
            if process_id.role == Role.CLIENT and process_id.index >= self.clients:
                raise ValueError(f"Adversary process '{process_id}' is not a client of the scenario")
        for spec in self.objects:
            byzantine = [server for server in blocks[spec.id] if server in processes]
            if len(byzantine) > spec.f:
                raise ValueError(f"Object '{spec.id}' has {len(byzantine)} Byzantine servers but f={spec.f}")

    def _validate_workload(self) -> None:
        for operation in self.workload.script:
            self._check_client(operation.client)
            spec = self._object_or_raise(operation.object)
            if operation.op not in OPERATIONS_BY_OBJECT_KIND[spec.kind]:
                raise ValueError(f"Operation '{operation.op}' is not supported by object '{spec.id}'")
            if operation.op == OperationKind.APPEND and operation.client != spec.writer:
                raise ValueError(f"Only the writer may append to object '{spec.id}', not '{operation.client}'")
            if operation.op in ATOMIC_TARGET_KINDS:
                target = self._object_or_raise(operation.target)
                if target.kind != ATOMIC_TARGET_KINDS[operation.op]:
                    raise ValueError(f"Operation '{operation.op}' cannot target object '{target.id}'")
                self._check_client(operation.partner)
            if operation.via is not None and operation.via not in self.server_blocks()[spec.id]:
                raise ValueError(f"Server '{operation.via}' is not a server of object '{spec.id}'")
        for generator in self.workload.random:
            spec = self._object_or_raise(generator.object)
            if spec.kind not in (ObjectKind.BDSO, ObjectKind.SBDSO, ObjectKind.SWBDLO):
                raise ValueError(f"Random workloads are not supported on object '{spec.id}'")
            for client in generator.clients or []:
                self._check_client(client)
        for final in self.workload.final_gets:
            spec = self._object_or_raise(final.object)
            if OperationKind.GET not in OPERATIONS_BY_OBJECT_KIND[spec.kind]:
                raise ValueError(f"Object '{spec.id}' does not support gets")
            for client in final.clients or []:
                self._check_client(client)

    def _check_client(self, client: ProcessId) -> None:
        if client.role != Role.CLIENT or client.index >= self.clients:
            raise ValueError(f"'{client}' is not a client of the scenario")

    def _object_or_raise(self, object_id: Optional[str]) -> ObjectSpec:
        spec = self.find_object(object_id)
        if spec is None:
            raise ValueError(f"Unknown object '{object_id}'")
        return spec

    def find_object(self, object_id: Optional[str]) -> Optional[ObjectSpec]:
        """
        Look up an object by its id.

        :param object_id: ID of the object.
        :return: The object, or `None` if the scenario has no such object.
        """
        return next((spec for spec in self.objects if spec.id == object_id), None)

    def server_blocks(self) -> dict[str, list[ProcessId]]:
        """
        Allocate server IDs to objects, one contiguous block per object in declaration order.

        :return: Map of object id to the IDs of its servers.
        """
        blocks = {}
        start = 0
        for spec in self.objects:
            blocks[spec.id] = server_ids(start, spec.n)
            start += spec.n
        return blocks

    def client_ids(self) -> list[ProcessId]:
        """IDs of every client of the scenario."""
        return [ProcessId.of(Role.CLIENT, index) for index in range(self.clients)]

    @property
    def byzantine_servers(self) -> set[ProcessId]:
        """Servers replaced by an adversary."""
        return {assignment.process for assignment in self.adversaries if assignment.process.role == Role.SERVER}

    @property
    def byzantine_clients(self) -> set[ProcessId]:
        """Clients replaced by an adversary."""
        return {assignment.process for assignment in self.adversaries if assignment.process.role == Role.CLIENT}

    def correct_servers(self, object_id: str) -> list[ProcessId]:
        """
        Correct servers of an object.

        :param object_id: ID of the object.
        :return: The IDs of its servers that are not Byzantine, in order.
        """
        byzantine = self.byzantine_servers
        return [server for server in self.server_blocks()[object_id] if server not in byzantine]

    @property
    def correct_clients(self) -> set[ProcessId]:
        """Clients that are not Byzantine."""
        return set(self.client_ids()) - self.byzantine_clients

    def adversary_for(self, process_id: ProcessId) -> Optional[AdversaryAssignment]:
        """
        Look up the adversary assigned to a process.

        :param process_id: ID of the process.
        :return: The assignment, or `None` if the process is correct.
        """
        return next((assignment for assignment in self.adversaries if assignment.process == process_id), None)

    def declared_pairs(self) -> list[AtomicPair]:
        """
        Pair up mirrored atomic operations of the scripted workload.

        :return: One `AtomicPair` for each pair of operations where each client names the other as partner and the
            other's payload as counterpart.
        """
        atomic = [operation for operation in self.workload.script if operation.op in ATOMIC_TARGET_KINDS]
        pairs = []
        seen = set()
        for first in atomic:
            for second in atomic:
                if (
                    first.client == second.partner
                    and second.client == first.partner
                    and first.object == second.object
                    and first.op == second.op
                    and first.payload == second.counterpart
                    and second.payload == first.counterpart
                    and first.client.sort_key < second.client.sort_key
                ):
                    key = (first.client, second.client, first.payload, second.payload)
                    if key in seen:
                        continue
                    seen.add(key)
                    pairs.append(
                        AtomicPair(
                            kind=first.op,
                            sbdso=first.object,
                            p=first.client,
                            q=second.client,
                            record_p=Record(creator=first.client, payload=first.payload_bytes),
                            target_p=first.target,
                            record_q=Record(creator=second.client, payload=second.payload_bytes),
                            target_q=second.target,
                        )
                    )
        return pairs


def bundled_scenario_path(name: str) -> Path:
    """
    Path of a scenario bundled with the package.

    :param name: Scenario name, optionally with a subdirectory e.g. `bdso_byzantine_matrix/spurious_set`.
    :return: The path of the JSON file.
    """
    return Path(__file__).parent.parent / SCENARIOS_DIRECTORY_NAME / f"{name}.json"


def load_scenario(location: str, strict_bounds: Optional[bool] = None) -> ScenarioConfig:
    """
    Load and validate a scenario file.

    :param location: Path of a scenario file, or the name of a bundled scenario.
    :param strict_bounds: Overrides the resilience bound strictness of the file when given.
    :raises ConfigInvalidError: If the file cannot be read or fails validation.
    :return: The validated scenario.
    """
    path = Path(location)
    if not path.exists():
        path = bundled_scenario_path(location)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalidError(f"Cannot read scenario '{location}': {exc}") from exc

    try:
        return ScenarioConfig.model_validate_json(text, context={"strict_bounds": strict_bounds})
    except ValidationError as exc:
        diagnostics = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}" for error in exc.errors()
        )
        raise ConfigInvalidError(f"Invalid scenario '{path}': {diagnostics}") from exc
