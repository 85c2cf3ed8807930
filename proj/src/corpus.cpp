#include "edin/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "edin/error.hpp"
#include "edin/io.hpp"
#include "edin/rng.hpp"
#include "edin/utf8.hpp"

namespace edin {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json parse_line(const std::string& line, std::size_t line_no,
                        const std::string& path) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    raise(Err::MalformedRecord,
          path + ":" + std::to_string(line_no) + ": malformed record");
  }
  return j;
}

template <typename T>
T field(const ordered_json& j, const char* key, std::size_t line_no,
        const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) {
    raise(Err::MalformedRecord, path + ":" + std::to_string(line_no) +
                                    ": missing field '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    raise(Err::MalformedRecord, path + ":" + std::to_string(line_no) +
                                    ": bad type for field '" + key + "'");
  }
}

void for_each_line(const std::string& path,
                   const std::function<void(const std::string&, std::size_t)>& fn) {
  const std::string contents = io::read_text_file(path);
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    fn(line, line_no);
  }
}

}  // namespace

DocumentSet load_documents(const std::string& path) {
  DocumentSet set;
  std::set<std::string> seen;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const ordered_json j = parse_line(line, line_no, path);
    Document doc;
    doc.id = field<std::string>(j, "id", line_no, path);
    doc.text = field<std::string>(j, "text", line_no, path);
    doc.timestamp = field<std::int64_t>(j, "timestamp", line_no, path);
    if (!seen.insert(doc.id).second) {
      raise(Err::DuplicateId, path + ":" + std::to_string(line_no) +
                                  ": duplicate document id '" + doc.id + "'");
    }
    const std::int64_t text_len = utf8::count_codepoints(doc.text);
    if (auto it = j.find("mentions"); it != j.end()) {
      if (!it->is_array()) {
        raise(Err::MalformedRecord, path + ":" + std::to_string(line_no) +
                                        ": 'mentions' must be an array");
      }
      for (const auto& m : *it) {
        GoldMention gm;
        gm.span.start = field<std::int64_t>(m, "start", line_no, path);
        gm.span.end = field<std::int64_t>(m, "end", line_no, path);
        gm.entity_id = field<std::string>(m, "entity_id", line_no, path);
        if (gm.entity_id.empty()) {
          raise(Err::MalformedRecord, path + ":" + std::to_string(line_no) +
                                          ": empty entity_id");
        }
        if (gm.span.start < 0 || gm.span.start >= gm.span.end ||
            gm.span.end > text_len) {
          raise(Err::SpanOutOfBounds,
                path + ":" + std::to_string(line_no) + ": span [" +
                    std::to_string(gm.span.start) + "," +
                    std::to_string(gm.span.end) + ") outside document '" +
                    doc.id + "' of length " + std::to_string(text_len));
        }
        doc.gold_mentions.push_back(std::move(gm));
      }
    }
    set.docs.push_back(std::move(doc));
  });
  return set;
}

EntityCatalog load_catalog(const std::string& path) {
  EntityCatalog catalog;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const ordered_json j = parse_line(line, line_no, path);
    EntityRecord rec;
    rec.id = field<std::string>(j, "id", line_no, path);
    rec.title = field<std::string>(j, "title", line_no, path);
    rec.description = field<std::string>(j, "description", line_no, path);
    rec.added_at = field<std::int64_t>(j, "added_at", line_no, path);
    if (rec.title.empty()) {
      raise(Err::MalformedRecord, path + ":" + std::to_string(line_no) +
                                      ": empty title for '" + rec.id + "'");
    }
    if (!catalog.by_id.emplace(rec.id, catalog.entities.size()).second) {
      raise(Err::DuplicateId, path + ":" + std::to_string(line_no) +
                                  ": duplicate entity id '" + rec.id + "'");
    }
    catalog.entities.push_back(std::move(rec));
  });
  return catalog;
}

std::pair<DocumentSet, EntityCatalog> load_corpus(
    const std::string& documents_path, const std::string& catalog_path) {
  return {load_documents(documents_path), load_catalog(catalog_path)};
}

std::string serialize_documents(const DocumentSet& docs) {
  std::string out;
  for (const Document& doc : docs.docs) {
    ordered_json j;
    j["id"] = doc.id;
    j["text"] = doc.text;
    j["timestamp"] = doc.timestamp;
    if (!doc.gold_mentions.empty()) {
      ordered_json arr = ordered_json::array();
      for (const GoldMention& m : doc.gold_mentions) {
        ordered_json mj;
        mj["start"] = m.span.start;
        mj["end"] = m.span.end;
        mj["entity_id"] = m.entity_id;
        arr.push_back(std::move(mj));
      }
      j["mentions"] = std::move(arr);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string serialize_catalog(const EntityCatalog& catalog) {
  std::string out;
  for (const EntityRecord& rec : catalog.entities) {
    ordered_json j;
    j["id"] = rec.id;
    j["title"] = rec.title;
    j["description"] = rec.description;
    j["added_at"] = rec.added_at;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void write_documents(const std::string& path, const DocumentSet& docs) {
  io::write_text_file(path, serialize_documents(docs));
}

void write_catalog(const std::string& path, const EntityCatalog& catalog) {
  io::write_text_file(path, serialize_catalog(catalog));
}

SplitSet temporal_split(const DocumentSet& docs, const EntityCatalog& catalog,
                        std::int64_t t1, std::int64_t t2,
                        double adapt_fraction, double dev_fraction,
                        std::uint64_t seed) {
  if (t1 >= t2) raise(Err::InvalidArgument, "temporal_split requires t1 < t2");
  if (adapt_fraction <= 0.0 || adapt_fraction >= 1.0) {
    raise(Err::InvalidArgument, "adapt_fraction must be in (0, 1)");
  }
  if (dev_fraction < 0.0 || adapt_fraction + dev_fraction >= 1.0) {
    raise(Err::InvalidArgument, "fractions must sum below 1");
  }

  SplitSet out;
  std::vector<std::size_t> window;
  for (std::size_t i = 0; i < docs.docs.size(); ++i) {
    const std::int64_t ts = docs.docs[i].timestamp;
    if (ts < t1) {
      out.train.docs.push_back(docs.docs[i]);
    } else if (ts < t2) {
      window.push_back(i);
    } else {
      ++out.discarded_after_t2;
    }
  }
  if (window.empty()) {
    raise(Err::EmptyWindow, "no documents fall in [t1, t2)");
  }

  SplitMix64 rng = SplitMix64::substream(seed, "temporal_split");
  const std::vector<std::size_t> order = shuffled_indices(window.size(), rng);
  const std::size_t n = window.size();
  const auto n_adapt = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * adapt_fraction));
  const auto n_dev = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * dev_fraction));

  // Membership by shuffled rank; original document order inside each split.
  std::vector<int> role(n, 2);  // 0 adapt, 1 dev, 2 test
  for (std::size_t r = 0; r < n; ++r) {
    if (r < n_adapt) {
      role[order[r]] = 0;
    } else if (r < n_adapt + n_dev) {
      role[order[r]] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Document& doc = docs.docs[window[i]];
    if (role[i] == 0) {
      out.adapt.docs.push_back(doc);
    } else if (role[i] == 1) {
      out.adapt_dev.docs.push_back(doc);
    } else {
      out.test.docs.push_back(doc);
    }
  }

  for (const EntityRecord& rec : catalog.entities) {
    if (rec.added_at < t1) {
      out.known_entities.insert(rec.id);
    } else if (rec.added_at < t2) {
      out.unknown_entities.insert(rec.id);
    }
  }
  return out;
}

RebalanceResult rebalance_adaptation(const DocumentSet& adapt,
                                     const SplitSet& splits,
                                     double target_ratio, std::uint64_t seed) {
  if (target_ratio <= 0.0) {
    raise(Err::InvalidArgument, "target_ratio must be positive");
  }
  std::size_t unknown_count = 0;
  std::size_t known_count = 0;
  std::vector<std::size_t> droppable;       // only-known documents
  std::vector<std::size_t> known_in_doc(adapt.docs.size(), 0);
  for (std::size_t i = 0; i < adapt.docs.size(); ++i) {
    bool has_unknown = false;
    for (const GoldMention& m : adapt.docs[i].gold_mentions) {
      if (splits.unknown_entities.count(m.entity_id)) {
        ++unknown_count;
        has_unknown = true;
      } else if (splits.known_entities.count(m.entity_id)) {
        ++known_count;
        ++known_in_doc[i];
      }
    }
    if (!has_unknown && known_in_doc[i] > 0) droppable.push_back(i);
  }
  if (unknown_count == 0) {
    raise(Err::NoUnknownMentions, "adaptation set has no unknown mentions");
  }

  const auto ratio_ok = [&](std::size_t known) {
    return known == 0 || static_cast<double>(unknown_count) >=
                             target_ratio * static_cast<double>(known);
  };
  if (ratio_ok(known_count)) return {adapt, true};

  std::size_t known_droppable = 0;
  for (std::size_t i : droppable) known_droppable += known_in_doc[i];
  if (!ratio_ok(known_count - known_droppable)) {
    // Unachievable: known mentions co-occurring with unknown ones exceed
    // the budget. Return the input unchanged with the warning flag.
    return {adapt, false};
  }

  SplitMix64 rng = SplitMix64::substream(seed, "rebalance_adaptation");
  const std::vector<std::size_t> order =
      shuffled_indices(droppable.size(), rng);
  std::vector<bool> drop(adapt.docs.size(), false);
  std::size_t remaining = known_count;
  for (std::size_t r = 0; r < order.size() && !ratio_ok(remaining); ++r) {
    const std::size_t doc_idx = droppable[order[r]];
    drop[doc_idx] = true;
    remaining -= known_in_doc[doc_idx];
  }

  RebalanceResult out;
  out.ratio_achieved = true;
  for (std::size_t i = 0; i < adapt.docs.size(); ++i) {
    if (!drop[i]) out.docs.docs.push_back(adapt.docs[i]);
  }
  return out;
}

FrequencyTable mention_frequency_table(const DocumentSet& train) {
  FrequencyTable table;
  for (const Document& doc : train.docs) {
    for (const GoldMention& m : doc.gold_mentions) {
      ++table[m.entity_id];
    }
  }
  return table;
}

std::size_t frequency_of(const FrequencyTable& table, const std::string& id) {
  auto it = table.find(id);
  return it == table.end() ? 0 : it->second;
}

}  // namespace edin
