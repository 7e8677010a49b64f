// Client-side index of the taxonomy tree: id -> node, parent -> children.
// Used for name display and the drill-down picker; a pure lookup, never a
// source of numbers.

import type { RankName, TaxonNode, TaxonomyTree } from "./types";

export const ROOT_ID = "ROOT";

export const RANK_ORDER: RankName[] = ["order", "family", "genus", "species"];

export class TaxonomyIndex {
  readonly byId = new Map<string, TaxonNode>();
  private readonly children = new Map<string, string[]>();

  constructor(tree: TaxonomyTree) {
    for (const node of tree.nodes) {
      this.byId.set(node.taxon_id, node);
      if (node.taxon_id === ROOT_ID) continue;
      const siblings = this.children.get(node.parent_id) ?? [];
      siblings.push(node.taxon_id);
      this.children.set(node.parent_id, siblings);
    }
    for (const ids of this.children.values()) {
      ids.sort();
    }
  }

  childrenOf(taxonId: string): string[] {
    return this.children.get(taxonId) ?? [];
  }

  node(taxonId: string): TaxonNode | undefined {
    return this.byId.get(taxonId);
  }

  displayName(taxonId: string): string {
    const node = this.byId.get(taxonId);
    if (!node) return taxonId;
    return node.common_name ? `${node.scientific_name} (${node.common_name})` : node.scientific_name;
  }

  rankOf(taxonId: string): RankName | undefined {
    return this.byId.get(taxonId)?.rank;
  }
}
