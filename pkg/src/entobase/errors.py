"""Exception types shared across entobase modules."""


class EntobaseError(Exception):
    """Base class for all entobase errors."""

    code = "internal_error"


class TaxonomyViolation(EntobaseError):
    """A taxonomy table failed validation; carries the full violation list."""

    code = "taxonomy_violation"

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class UnknownTaxon(EntobaseError):
    code = "unknown_taxon"


class EmptyImage(EntobaseError):
    code = "empty_image"


class UndecodableImage(EntobaseError):
    code = "undecodable_image"


class KeyMismatch(EntobaseError):
    """Probability vector keys do not match the taxonomy's species set."""

    code = "key_mismatch"


class InvalidProbabilityVector(EntobaseError):
    code = "invalid_probability_vector"


class BackendUnavailable(EntobaseError):
    code = "backend_unavailable"


class EmptyDataset(EntobaseError):
    code = "empty_dataset"


class InvalidHistory(EntobaseError):
    code = "invalid_history"


class UnknownTaxonInVote(EntobaseError):
    code = "unknown_taxon_in_vote"


class MissingWeight(EntobaseError):
    code = "missing_weight"


class NotExpert(EntobaseError):
    code = "not_expert"


class NoSuchObservation(EntobaseError):
    code = "no_such_observation"


class AlreadyExpertResolved(EntobaseError):
    code = "already_expert_resolved"


class NotResolvable(EntobaseError):
    """Expert resolution requested for an observation that is still PENDING."""

    code = "not_resolvable"


class ObservationQuarantined(EntobaseError):
    code = "observation_quarantined"


class OutOfRangeCoordinates(EntobaseError):
    code = "out_of_range_coordinates"


class StorageFailure(EntobaseError):
    code = "storage_failure"


class StoreLocked(EntobaseError):
    code = "store_locked"


class AuthFailure(EntobaseError):
    code = "auth_failure"


class BadFilter(EntobaseError):
    code = "bad_filter"


class BadCursor(EntobaseError):
    code = "bad_cursor"
