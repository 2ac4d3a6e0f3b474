#include "xchan/gptscore.hpp"

#include <cctype>
#include <mutex>
#include <thread>

#include "xchan/digest.hpp"
#include "xchan/errors.hpp"
#include "xchan/random.hpp"

namespace xchan {

namespace {

constexpr EvaluationItem kItems[] = {
    {ItemCategory::reasoning, "informativeness",
     "The explanation provides sufficient information to support how the two sentences are associated to the label."},
    {ItemCategory::reasoning, "causal_support",
     "The explanation explains why these two sentences are associated to the label."},
    {ItemCategory::reasoning, "convincingness",
     "The explanation is persuasive and convinces me to believe that the question is associated to the label."},
    {ItemCategory::reasoning, "coherence",
     "The explanation bridges the gap between the two sentences and the label in a coherent and unsurprising "
     "manner."},
    {ItemCategory::clarity, "clarity4student", "The explanation is easy to understand for a high school student."},
    {ItemCategory::clarity, "clarity4graduate", "The explanation is easy to understand for a university graduate."},
    {ItemCategory::relevance, "label_relevance", "Given the two sentences and the label, the explanation is relevant."},
    {ItemCategory::relevance, "input_relevance", "Given the two sentences, the explanation is relevant."},
    // Statement text is reproduced as published, typo included.
    {ItemCategory::relevance, "importance",
     "Ths explanation highlights the most important parts in the two sentences that associate to the label."},
};

constexpr std::string_view kPhrases[] = {"strongly disagree", "somewhat disagree", "somewhat agree",
                                         "strongly agree"};

bool is_wrapper(char c) {
  switch (c) {
    case '(': case ')': case '[': case ']': case '{': case '}':
    case '"': case '\'': case '`':
      return true;
    default:
      return std::isspace(static_cast<unsigned char>(c)) != 0;
  }
}

}  // namespace

std::string_view to_string(ItemCategory category) {
  switch (category) {
    case ItemCategory::reasoning: return "reasoning";
    case ItemCategory::clarity: return "clarity";
    case ItemCategory::relevance: return "relevance";
  }
  return "reasoning";
}

std::span<const EvaluationItem> evaluation_items() { return kItems; }

const EvaluationItem& evaluation_item(std::string_view name) {
  for (const auto& item : kItems) {
    if (item.name == name) return item;
  }
  throw InvalidInput("unknown evaluation item '" + std::string(name) + "'");
}

int likert_value(Likert response) {
  switch (response) {
    case Likert::strongly_disagree: return -2;
    case Likert::somewhat_disagree: return -1;
    case Likert::somewhat_agree: return 1;
    case Likert::strongly_agree: return 2;
  }
  return 0;
}

std::string_view likert_phrase(Likert response) { return kPhrases[static_cast<int>(response)]; }

std::string build_gptscore_prompt(const ExplanationRecord& record, const EvaluationItem& item) {
  std::string p;
  p += "Following are two sentences, a label and an explanation.\n";
  p += "The two sentences are: " + record.premise + " " + record.hypothesis + "\n";
  p += "The label is: " + std::string(to_string(record.label)) + "\n";
  p += "The explanation is " + record.explanan + "\n";
  p += "Please use one of 'strongly disagree', 'somewhat disagree', 'somewhat agree' and 'strongly agree' to "
       "describe your attitude towards the following statement: ";
  p += item.statement;
  p += "\nDo not add additional words.";
  return p;
}

LikertResponse parse_likert(std::string_view raw) {
  LikertResponse out;
  out.raw = std::string(raw);

  std::size_t b = 0, e = raw.size();
  for (bool changed = true; changed && b < e;) {
    changed = false;
    while (b < e && is_wrapper(raw[b])) ++b, changed = true;
    while (e > b && (is_wrapper(raw[e - 1]) || raw[e - 1] == '.')) --e, changed = true;
  }

  std::string norm;
  bool pending_space = false;
  for (auto c : raw.substr(b, e - b)) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      pending_space = !norm.empty();
      continue;
    }
    if (pending_space) norm.push_back(' ');
    pending_space = false;
    norm.push_back(static_cast<char>(std::tolower(u)));
  }
  for (int k = 0; k < 4; ++k) {
    if (norm == kPhrases[k]) out.parsed = static_cast<Likert>(k);
  }
  return out;
}

std::string MockBackend::complete(const std::string& prompt) {
  count_call();
  Rng rng(derive_seed(seed_, fnv1a64(prompt)));
  const auto pick = std::string(kPhrases[rng.below(4)]);
  const double u = rng.uniform();
  if (u < garbage_rate_) return "I am not sure.";
  const auto style = rng.below(40);
  if (style == 0) return "(" + pick + ")";
  if (style == 1) return pick + "\n";
  if (style == 2) return "\n" + std::string(1, static_cast<char>(std::toupper(pick[0]))) + pick.substr(1) + ".";
  return pick;
}

std::string RemoteBackend::complete(const std::string& prompt) {
  count_call();
  nlohmann::json body = {{"model", config_.model}, {"temperature", 0}, {"n", 1}, {"max_tokens", config_.max_tokens}};
  if (config_.chat) {
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  } else {
    body["prompt"] = prompt;
  }
  const auto path = config_.chat ? "/chat/completions" : "/completions";
  const auto res = with_retry(config_.retry, [&] { return post_json(config_.endpoint, path, body); });
  try {
    const auto& choice = res.at("choices").at(0);
    if (config_.chat) return choice.at("message").at("content").get<std::string>();
    return choice.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unexpected completion response: ") + e.what(), false);
  }
}

std::string ResponseCache::key(const ExplanationRecord& record, const EvaluationItem& item,
                               const std::string& backend_id) {
  return "gpt|" + backend_id + "|" + std::string(item.name) + "|" +
         sha256_hex(record.id + "\n" + build_gptscore_prompt(record, item));
}

std::optional<std::string> ResponseCache::get(const ExplanationRecord& record, const EvaluationItem& item,
                                              const std::string& backend_id) {
  auto found = store_.get(key(record, item, backend_id));
  if (found.status != RecordStore::Status::hit) return std::nullopt;
  return std::move(found.payload);
}

void ResponseCache::put(const ExplanationRecord& record, const EvaluationItem& item, const std::string& backend_id,
                        const std::string& response) {
  store_.put(key(record, item, backend_id), response);
}

GptScoreTable score_records(std::span<const ExplanationRecord> records, std::span<const EvaluationItem> items,
                            CompletionBackend& backend, ResponseCache& cache) {
  GptScoreTable table;
  for (const auto& item : items) table.items.emplace_back(item.name);
  table.rows.resize(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    table.rows[r].id = records[r].id;
    table.rows[r].values.resize(items.size());
    table.rows[r].raw.resize(items.size());
  }

  const auto calls_before = backend.calls();
  const std::string backend_id = backend.id();
  const std::size_t total = records.size() * items.size();
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> transport_failures{0};
  std::atomic<std::size_t> parse_failures{0};
  std::mutex cache_mutex;

  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const auto r = k / items.size();
      const auto i = k % items.size();
      const auto& rec = records[r];
      std::optional<std::string> response;
      {
        std::lock_guard lock(cache_mutex);
        response = cache.get(rec, items[i], backend_id);
      }
      if (!response) {
        try {
          response = backend.complete(build_gptscore_prompt(rec, items[i]));
        } catch (const TransportError&) {
          ++transport_failures;
          continue;
        }
        std::lock_guard lock(cache_mutex);
        cache.put(rec, items[i], backend_id, *response);
      }
      auto& row = table.rows[r];
      row.values[i] = parse_likert(*response).numeric();
      if (!row.values[i]) ++parse_failures;
      row.raw[i] = *response;
    }
  };

  const auto threads = std::max<std::size_t>(1, std::min(backend.max_parallel(), total));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  table.transport_failures = transport_failures.load();
  table.parse_failures = parse_failures.load();
  table.backend_calls = backend.calls() - calls_before;
  return table;
}

}  // namespace xchan
