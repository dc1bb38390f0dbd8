"""
Module for storing constants used throughout the simulator.
"""

# Upper bound on the payload carried by a single record
MAX_RECORD_PAYLOAD_BYTES = 64 * 1024

# Number of bytes kept from a SHA-256 digest for content digests and authentication tags
DIGEST_BYTES = 8

# Stream identifiers used to derive independent random generators from the scenario seed
RNG_STREAM_SCHEDULER = 0
RNG_STREAM_CLIENT = 1
RNG_STREAM_SERVER = 2
RNG_STREAM_ADVERSARY = 3
RNG_STREAM_WORKLOAD = 4

# Notes recorded as `local_emit` events in the history
NOTE_INSERT = "insert"
NOTE_BRB_BROADCAST = "brb_broadcast"
NOTE_BRB_DELIVER = "brb_deliver"
NOTE_BRB_EQUIVOCATION = "brb_equivocation"
NOTE_DISPATCH = "dispatch"
NOTE_NOTIFY_SENT = "notify_sent"
NOTE_ATOMIC_COMPLETED = "atomic_completed"
NOTE_UNAUTHORIZED_CLIENT = "unauthorized_client"
NOTE_TARGET_UNKNOWN = "target_unknown"

# Name of the bundled scenarios directory inside the package
SCENARIOS_DIRECTORY_NAME = "scenarios"
