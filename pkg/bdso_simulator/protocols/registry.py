"""
Module for the runtime registry of the replicated objects of a scenario.
"""

from typing import Optional

from pydantic import BaseModel, ConfigDict

from bdso_simulator.core.exceptions import TargetUnknownError
from bdso_simulator.core.process_id import ProcessId
from bdso_simulator.schemas.scenario import (
    AdmissionMode,
    ObjectKind,
    PrefixFilter,
    ScenarioConfig,
    ServerSelection,
)


class ObjectView(BaseModel):
    """
    Model for everything a process needs to know about one object: its kind, its servers and its parameters.
    """

    model_config = ConfigDict(frozen=True)

    id: str
    kind: ObjectKind
    servers: list[ProcessId]
    f: int
    mode: AdmissionMode = AdmissionMode.OPEN
    # Registered clients of a restricted object and the `f` of the object they serve
    authorized: list[ProcessId] = []
    admission_f: int = 0
    writer: Optional[ProcessId] = None
    prefix_filter: PrefixFilter = PrefixFilter.CLOSURE
    selection: ServerSelection = ServerSelection.RANDOM
    insert_threshold: Optional[int] = None

    @property
    def n(self) -> int:
        """Number of servers of the object."""
        return len(self.servers)


class ObjectRegistry:
    """
    Registry resolving object ids to `ObjectView`s.
    """

    def __init__(self, views: list[ObjectView]) -> None:
        """
        Initialise the `ObjectRegistry`.

        :param views: Views of every object of the scenario.
        """
        self._views = {view.id: view for view in views}

    @classmethod
    def from_scenario(cls, scenario: ScenarioConfig) -> "ObjectRegistry":
        """
        Build the registry of a scenario.

        :param scenario: The validated scenario.
        :return: The registry.
        """
        blocks = scenario.server_blocks()
        views = []
        for spec in scenario.objects:
            source = scenario.find_object(spec.admission_from)
            views.append(
                ObjectView(
                    id=spec.id,
                    kind=spec.kind,
                    servers=blocks[spec.id],
                    f=spec.f,
                    mode=spec.mode,
                    authorized=blocks[source.id] if source is not None else [],
                    admission_f=source.f if source is not None else 0,
                    writer=spec.writer,
                    prefix_filter=spec.prefix_filter,
                    selection=spec.selection,
                    insert_threshold=spec.insert_threshold,
                )
            )
        return cls(views)

    def resolve(self, object_id: str) -> ObjectView:
        """
        Resolve an object id.

        :param object_id: ID of the object.
        :raises TargetUnknownError: If no object has this id.
        :return: The view of the object.
        """
        view = self._views.get(object_id)
        if view is None:
            raise TargetUnknownError(f"No object with id '{object_id}'")
        return view

    def views(self) -> list[ObjectView]:
        """Views of every object, in declaration order."""
        return list(self._views.values())
