#include "edin/indexing.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <nlohmann/json.hpp>

#include "edin/error.hpp"
#include "edin/io.hpp"
#include "edin/utf8.hpp"

namespace edin {

using ordered_json = nlohmann::ordered_json;

ContextWindow extract_context(const Document& doc, Span span) {
  const std::int64_t text_len = utf8::count_codepoints(doc.text);
  if (span.start < 0 || span.start >= span.end || span.end > text_len) {
    raise(Err::SpanOutOfBounds, "span outside document '" + doc.id + "'");
  }

  // Sentence boundaries: position straight after '.', '!' or '?' that is
  // followed by whitespace. Boundaries are code point indices.
  std::vector<std::int64_t> starts{0};
  std::size_t byte = 0;
  std::int64_t cp = 0;
  char32_t prev = 0;
  while (byte < doc.text.size()) {
    const char32_t c = utf8::codepoint_at_byte(doc.text, byte);
    if ((prev == U'.' || prev == U'!' || prev == U'?') &&
        (c == U' ' || c == U'\t' || c == U'\n' || c == U'\r')) {
      starts.push_back(cp);
    }
    byte += utf8::sequence_length(static_cast<unsigned char>(doc.text[byte]));
    ++cp;
    prev = c;
  }
  starts.push_back(text_len);

  for (std::size_t s = 0; s + 1 < starts.size(); ++s) {
    const std::int64_t lo = starts[s];
    const std::int64_t hi = starts[s + 1];
    if (span.start >= lo && span.end <= hi) {
      // Trim leading whitespace so windows do not start mid-gap.
      std::int64_t begin = lo;
      while (begin < span.start) {
        const std::size_t b = utf8::byte_offset(doc.text, begin);
        const char32_t c = utf8::codepoint_at_byte(doc.text, b);
        if (c != U' ' && c != U'\t' && c != U'\n' && c != U'\r') break;
        ++begin;
      }
      ContextWindow window;
      window.sentence = utf8::substr(doc.text, begin, hi);
      window.span = {span.start - begin, span.end - begin};
      return window;
    }
  }
  // Span crosses a boundary: fall back to the whole text.
  return {doc.text, span};
}

std::string cluster_title(const Cluster& cluster, const MentionPool& pool) {
  if (cluster.member_ids.empty()) {
    raise(Err::EmptyCluster, "cluster " + std::to_string(cluster.id) +
                                 " has no members");
  }
  const auto fold = [](const std::string& s) {
    std::string out = s;
    for (char& c : out) {
      c = static_cast<char>(
          std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
  };

  // fold -> (group count, original -> count)
  std::map<std::string, std::pair<std::size_t, std::map<std::string, std::size_t>>>
      groups;
  for (int mid : cluster.member_ids) {
    const std::string& surface =
        pool.mentions[static_cast<std::size_t>(mid)].surface;
    auto& group = groups[fold(surface)];
    ++group.first;
    ++group.second[surface];
  }

  const std::map<std::string, std::size_t>* winner = nullptr;
  std::size_t winner_count = 0;
  std::string winner_smallest;
  for (const auto& [folded, group] : groups) {
    const std::string& smallest = group.second.begin()->first;
    if (winner == nullptr || group.first > winner_count ||
        (group.first == winner_count && smallest < winner_smallest)) {
      winner = &group.second;
      winner_count = group.first;
      winner_smallest = smallest;
    }
  }

  std::string title;
  std::size_t title_count = 0;
  for (const auto& [original, count] : *winner) {
    if (count > title_count) {  // map order already breaks ties lexicographically
      title = original;
      title_count = count;
    }
  }
  return title;
}

namespace {

class DocLookup {
 public:
  explicit DocLookup(const DocumentSet& docs) {
    for (const Document& doc : docs.docs) by_id_.emplace(doc.id, &doc);
  }

  ContextWindow window_of(const PooledMention& mention) const {
    auto it = by_id_.find(mention.doc_id);
    if (it == by_id_.end()) {
      raise(Err::LookupMiss, "document '" + mention.doc_id + "' not found");
    }
    return extract_context(*it->second, mention.span);
  }

 private:
  std::map<std::string, const Document*> by_id_;
};

}  // namespace

IndexEntryDraft index_cluster(const Cluster& cluster, const MentionPool& pool,
                              const DocumentSet& docs,
                              const EmbeddingProvider& provider,
                              std::size_t max_context_chars) {
  if (cluster.member_ids.empty()) {
    raise(Err::EmptyCluster, "cannot index an empty cluster");
  }
  std::vector<int> order = cluster.member_ids;
  std::sort(order.begin(), order.end());
  const DocLookup lookup(docs);

  // Whole windows, earliest first, capped by character budget.
  std::string description;
  for (int mid : order) {
    const ContextWindow window =
        lookup.window_of(pool.mentions[static_cast<std::size_t>(mid)]);
    const std::size_t extra =
        window.sentence.size() + (description.empty() ? 0 : 7);  // " [SEP] "
    if (!description.empty() && description.size() + extra > max_context_chars) {
      break;
    }
    if (description.empty() && window.sentence.size() > max_context_chars) {
      break;
    }
    if (!description.empty()) description += " [SEP] ";
    description += window.sentence;
  }

  IndexEntryDraft draft;
  draft.synthetic_entity_id = "EU:" + std::to_string(cluster.id);
  draft.title = cluster_title(cluster, pool);
  draft.source_cluster = cluster.id;
  draft.member_count = cluster.member_ids.size();
  draft.vector = encode_entity(provider, draft.title, description);
  return draft;
}

std::vector<IndexEntryDraft> index_mentions(const Cluster& cluster,
                                            const MentionPool& pool,
                                            const DocumentSet& docs,
                                            const EmbeddingProvider& provider) {
  if (cluster.member_ids.empty()) {
    raise(Err::EmptyCluster, "cannot index an empty cluster");
  }
  std::vector<int> order = cluster.member_ids;
  std::sort(order.begin(), order.end());
  const DocLookup lookup(docs);

  std::vector<IndexEntryDraft> drafts;
  drafts.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const PooledMention& mention =
        pool.mentions[static_cast<std::size_t>(order[i])];
    const ContextWindow window = lookup.window_of(mention);
    IndexEntryDraft draft;
    draft.synthetic_entity_id =
        "EU:" + std::to_string(cluster.id) + ":" + std::to_string(i);
    draft.title = mention.surface;
    draft.source_cluster = cluster.id;
    draft.member_count = 1;
    draft.vector = encode_entity(provider, draft.title, window.sentence);
    drafts.push_back(std::move(draft));
  }
  return drafts;
}

void merge_drafts(DenseIndex& index, const std::vector<IndexEntryDraft>& drafts,
                  EntityCatalog& catalog, std::int64_t adaptation_time) {
  if (drafts.empty()) return;
  std::vector<std::pair<std::string, VecF>> entries;
  entries.reserve(drafts.size());
  for (const IndexEntryDraft& draft : drafts) {
    if (catalog.by_id.count(draft.synthetic_entity_id)) {
      raise(Err::DuplicateId, "synthetic id '" + draft.synthetic_entity_id +
                                  "' collides with the catalog");
    }
    entries.emplace_back(draft.synthetic_entity_id, draft.vector);
  }
  index.insert(entries);
  for (const IndexEntryDraft& draft : drafts) {
    EntityRecord rec;
    rec.id = draft.synthetic_entity_id;
    rec.title = draft.title;
    rec.description = "";
    rec.added_at = adaptation_time;
    catalog.by_id.emplace(rec.id, catalog.entities.size());
    catalog.entities.push_back(std::move(rec));
  }
}

std::string serialize_drafts(const std::vector<IndexEntryDraft>& drafts) {
  std::string out;
  for (const IndexEntryDraft& draft : drafts) {
    ordered_json j;
    j["id"] = draft.synthetic_entity_id;
    j["title"] = draft.title;
    j["cluster_id"] = draft.source_cluster;
    j["member_count"] = draft.member_count;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_draft_vectors(const std::string& path,
                         const std::vector<IndexEntryDraft>& drafts) {
  io::EmbeddingFile file;
  file.dim = drafts.empty() ? 0 : static_cast<std::uint32_t>(drafts.front().vector.size());
  for (const IndexEntryDraft& draft : drafts) {
    file.records.emplace_back(draft.synthetic_entity_id, draft.vector);
  }
  io::write_embedding_file(path, file);
}

}  // namespace edin
