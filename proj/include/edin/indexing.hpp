#pragma once

#include <string>
#include <vector>

#include "edin/ann_index.hpp"
#include "edin/corpus.hpp"
#include "edin/discovery.hpp"
#include "edin/embedding.hpp"
#include "edin/types.hpp"

namespace edin {

// Index entries for discovered unknown entities. Synthetic ids live in
// the "EU:" namespace so evaluation can map them back to clusters without
// a registry: "EU:{cluster}" for cluster-based drafts, "EU:{cluster}:{m}"
// for mention-based ones.
struct IndexEntryDraft {
  std::string synthetic_entity_id;
  std::string title;
  int source_cluster = 0;
  VecF vector;
  std::size_t member_count = 0;
};

struct ContextWindow {
  std::string sentence;
  Span span;  // re-based to sentence offsets
};

// The single sentence containing the span: text is split on '.', '!' or
// '?' followed by whitespace; when the span crosses a sentence boundary
// (or there is no boundary) the whole text is used.
ContextWindow extract_context(const Document& doc, Span span);

// Most frequent surface after ASCII case folding; the winning fold group
// is the one with the highest count, ties going to the group holding the
// lexicographically smallest original-case string, and the title is the
// most frequent original-case string within the winning group (ties again
// lexicographically smallest).
std::string cluster_title(const Cluster& cluster, const MentionPool& pool);

// Cluster-based indexing: member context windows joined with " [SEP] " in
// mention-id order, truncated to whole windows under max_context_chars,
// encoded with the entity encoder under the pooled title.
IndexEntryDraft index_cluster(const Cluster& cluster, const MentionPool& pool,
                              const DocumentSet& docs,
                              const EmbeddingProvider& provider,
                              std::size_t max_context_chars);

// Mention-based indexing: one draft per member, titled by its surface and
// encoded from its own context window.
std::vector<IndexEntryDraft> index_mentions(const Cluster& cluster,
                                            const MentionPool& pool,
                                            const DocumentSet& docs,
                                            const EmbeddingProvider& provider);

// Inserts the drafts and appends synthetic entity records (empty
// description, added_at = adaptation_time). Draft ids must not collide
// with catalog ids; checked exhaustively.
void merge_drafts(DenseIndex& index, const std::vector<IndexEntryDraft>& drafts,
                  EntityCatalog& catalog, std::int64_t adaptation_time);

std::string serialize_drafts(const std::vector<IndexEntryDraft>& drafts);
void write_draft_vectors(const std::string& path,
                         const std::vector<IndexEntryDraft>& drafts);

}  // namespace edin
