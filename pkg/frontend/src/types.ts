// Wire types mirroring the /api/v1 JSON payloads. The UI renders these
// verbatim; it never recomputes consensus, confidence, or statistics.

export type ScreeningStatus = "ACCEPTED" | "FLAGGED_DUPLICATE" | "FLAGGED_NO_INSECT";
export type ConsensusStatus = "PENDING" | "CONSENSUS" | "DISPUTED" | "EXPERT_RESOLVED";
export type RankName = "root" | "order" | "family" | "genus" | "species";

export interface ScreeningVerdict {
  status: ScreeningStatus;
  matched_observation_id: string | null;
  max_species_prob: number;
  entropy: number;
}

export interface ClassificationResult {
  chosen: string;
  chosen_rank: RankName;
  confidence: number;
  path: [string, number][];
  thresholds_used: Record<string, number>;
}

export interface ConsensusResult {
  observation_id: string;
  status: ConsensusStatus;
  label: string | null;
  share: number;
  total_weight: number;
  vote_count: number;
}

export interface Vote {
  vote_id: string;
  observation_id: string;
  user_id: string;
  taxon_id: string;
  timestamp: number;
  is_expert: boolean;
}

export interface Observation {
  observation_id: string;
  image_ref: string;
  phash: string;
  latitude: number;
  longitude: number;
  captured_at: number;
  submitted_by: string;
  created_at: number;
  source: string;
  screening: ScreeningVerdict;
  machine_result: ClassificationResult | null;
  raw_probs_ref: string | null;
  consensus: ConsensusResult;
  tally: Record<string, number>;
  votes?: Vote[];
}

export interface Page<T> {
  items: T[];
  next_cursor: string | null;
}

export interface TaxonNode {
  taxon_id: string;
  parent_id: string;
  rank: RankName;
  scientific_name: string;
  common_name: string;
}

export interface TaxonomyTree {
  version: number;
  nodes: TaxonNode[];
}

export interface DemographyRow {
  taxon_id: string;
  lat_idx: number;
  lon_idx: number;
  cell_size: number;
  year: number;
  month: number;
  count: number;
  total: number;
  relative_frequency: number;
}

export interface DemographyResponse {
  taxon: string;
  rows: DemographyRow[];
}

export interface NoveltyEvent {
  taxon_id: string;
  lat_idx: number;
  lon_idx: number;
  first_timestamp: number;
  observation_id: string;
}

export interface CurrentUser {
  user_id: string;
  is_expert: boolean;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
