#include "storycap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "storycap/errors.hpp"
#include "storycap/token.hpp"

namespace storycap::metrics {

using nlohmann::json;

// --- Porter stemmer -------------------------------------------------------

namespace {

// Direct rendering of the 1980 algorithm: b holds the word, k the index of
// its current last character.
class PorterStemmer {
public:
    std::string stem(const std::string& word) {
        b = word;
        k = static_cast<int>(b.size()) - 1;
        if (k <= 1) return b;
        step1ab();
        step1c();
        step2();
        step3();
        step4();
        step5();
        return b.substr(0, k + 1);
    }

private:
    std::string b;
    int k = 0, j = 0;

    bool cons(int i) const {
        switch (b[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u': return false;
            case 'y': return i == 0 ? true : !cons(i - 1);
            default: return true;
        }
    }

    // Number of consonant-vowel sequences in b[0..j].
    int m() const {
        int n = 0, i = 0;
        while (true) {
            if (i > j) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > j) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > j) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const {
        for (int i = 0; i <= j; ++i)
            if (!cons(i)) return true;
        return false;
    }

    bool double_consonant(int i) const {
        if (i < 1) return false;
        if (b[i] != b[i - 1]) return false;
        return cons(i);
    }

    // consonant-vowel-consonant ending where the final consonant is not
    // w, x or y; signals a short stem like "hop" in "hopping".
    bool cvc(int i) const {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        return b[i] != 'w' && b[i] != 'x' && b[i] != 'y';
    }

    bool ends(const char* s) {
        const int len = static_cast<int>(std::char_traits<char>::length(s));
        if (len > k + 1) return false;
        if (b.compare(k - len + 1, len, s) != 0) return false;
        j = k - len;
        return true;
    }

    void set_to(const char* s) {
        const int len = static_cast<int>(std::char_traits<char>::length(s));
        b.replace(j + 1, b.size() - j - 1, s);
        k = j + len;
    }

    void replace_if_m_positive(const char* s) {
        if (m() > 0) set_to(s);
    }

    void step1ab() {
        if (b[k] == 's') {
            if (ends("sses")) {
                k -= 2;
            } else if (ends("ies")) {
                set_to("i");
            } else if (b[k - 1] != 's') {
                --k;
            }
        }
        if (ends("eed")) {
            if (m() > 0) --k;
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k = j;
            if (ends("at")) {
                set_to("ate");
            } else if (ends("bl")) {
                set_to("ble");
            } else if (ends("iz")) {
                set_to("ize");
            } else if (double_consonant(k)) {
                if (b[k] != 'l' && b[k] != 's' && b[k] != 'z') --k;
            } else if (m() == 1 && cvc(k)) {
                j = k;
                set_to("e");
            }
        }
    }

    void step1c() {
        if (ends("y") && vowel_in_stem()) b[k] = 'i';
    }

    void step2() {
        if (k < 1) return;
        switch (b[k - 1]) {
            case 'a':
                if (ends("ational")) { replace_if_m_positive("ate"); break; }
                if (ends("tional")) { replace_if_m_positive("tion"); break; }
                break;
            case 'c':
                if (ends("enci")) { replace_if_m_positive("ence"); break; }
                if (ends("anci")) { replace_if_m_positive("ance"); break; }
                break;
            case 'e':
                if (ends("izer")) { replace_if_m_positive("ize"); break; }
                break;
            case 'l':
                if (ends("abli")) { replace_if_m_positive("able"); break; }
                if (ends("alli")) { replace_if_m_positive("al"); break; }
                if (ends("entli")) { replace_if_m_positive("ent"); break; }
                if (ends("eli")) { replace_if_m_positive("e"); break; }
                if (ends("ousli")) { replace_if_m_positive("ous"); break; }
                break;
            case 'o':
                if (ends("ization")) { replace_if_m_positive("ize"); break; }
                if (ends("ation")) { replace_if_m_positive("ate"); break; }
                if (ends("ator")) { replace_if_m_positive("ate"); break; }
                break;
            case 's':
                if (ends("alism")) { replace_if_m_positive("al"); break; }
                if (ends("iveness")) { replace_if_m_positive("ive"); break; }
                if (ends("fulness")) { replace_if_m_positive("ful"); break; }
                if (ends("ousness")) { replace_if_m_positive("ous"); break; }
                break;
            case 't':
                if (ends("aliti")) { replace_if_m_positive("al"); break; }
                if (ends("iviti")) { replace_if_m_positive("ive"); break; }
                if (ends("biliti")) { replace_if_m_positive("ble"); break; }
                break;
            default:
                break;
        }
    }

    void step3() {
        switch (b[k]) {
            case 'e':
                if (ends("icate")) { replace_if_m_positive("ic"); break; }
                if (ends("ative")) { replace_if_m_positive(""); break; }
                if (ends("alize")) { replace_if_m_positive("al"); break; }
                break;
            case 'i':
                if (ends("iciti")) { replace_if_m_positive("ic"); break; }
                break;
            case 'l':
                if (ends("ical")) { replace_if_m_positive("ic"); break; }
                if (ends("ful")) { replace_if_m_positive(""); break; }
                break;
            case 's':
                if (ends("ness")) { replace_if_m_positive(""); break; }
                break;
            default:
                break;
        }
    }

    void step4() {
        if (k < 1) return;
        switch (b[k - 1]) {
            case 'a': if (ends("al")) break; return;
            case 'c': if (ends("ance")) break; if (ends("ence")) break; return;
            case 'e': if (ends("er")) break; return;
            case 'i': if (ends("ic")) break; return;
            case 'l': if (ends("able")) break; if (ends("ible")) break; return;
            case 'n':
                if (ends("ant")) break;
                if (ends("ement")) break;
                if (ends("ment")) break;
                if (ends("ent")) break;
                return;
            case 'o':
                if (ends("ion") && j >= 0 && (b[j] == 's' || b[j] == 't')) break;
                if (ends("ou")) break;
                return;
            case 's': if (ends("ism")) break; return;
            case 't': if (ends("ate")) break; if (ends("iti")) break; return;
            case 'u': if (ends("ous")) break; return;
            case 'v': if (ends("ive")) break; return;
            case 'z': if (ends("ize")) break; return;
            default: return;
        }
        if (m() > 1) k = j;
    }

    void step5() {
        j = k;
        if (b[k] == 'e') {
            const int a = m();
            if (a > 1 || (a == 1 && !cvc(k - 1))) --k;
        }
        if (b[k] == 'l' && double_consonant(k) && m() > 1) --k;
    }
};

Tokens lowercase_all(const Tokens& tokens) {
    Tokens out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(to_lower(t));
    return out;
}

// N-grams as joined strings; '\x1f' cannot appear in tokens.
std::unordered_map<std::string, int> ngram_counts(const Tokens& tokens, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) < n) return counts;
    for (size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int d = 1; d < n; ++d) {
            key += '\x1f';
            key += tokens[i + d];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace

std::string porter_stem(const std::string& word) {
    PorterStemmer stemmer;
    return stemmer.stem(to_lower(word));
}

// --- BLEU ------------------------------------------------------------------

double bleu4(const std::vector<Tokens>& hypotheses,
             const std::vector<std::vector<Tokens>>& references) {
    if (hypotheses.empty()) throw InputError("bleu4: empty hypothesis set");
    if (hypotheses.size() != references.size())
        throw InputError("bleu4: hypothesis and reference counts differ");

    long long hyp_len = 0, ref_len = 0;
    long long totals[4] = {0, 0, 0, 0};
    long long matches[4] = {0, 0, 0, 0};

    for (size_t i = 0; i < hypotheses.size(); ++i) {
        if (references[i].empty())
            throw InputError("bleu4: hypothesis " + std::to_string(i) + " has no references");
        const Tokens hyp = lowercase_all(hypotheses[i]);
        std::vector<Tokens> refs;
        refs.reserve(references[i].size());
        for (const auto& r : references[i]) refs.push_back(lowercase_all(r));

        hyp_len += static_cast<long long>(hyp.size());
        // Closest reference length; ties prefer the shorter.
        long long best_ref = static_cast<long long>(refs[0].size());
        for (const auto& r : refs) {
            const long long len = static_cast<long long>(r.size());
            const long long d_new = std::llabs(len - static_cast<long long>(hyp.size()));
            const long long d_old = std::llabs(best_ref - static_cast<long long>(hyp.size()));
            if (d_new < d_old || (d_new == d_old && len < best_ref)) best_ref = len;
        }
        ref_len += best_ref;

        for (int n = 1; n <= 4; ++n) {
            const auto hyp_counts = ngram_counts(hyp, n);
            std::unordered_map<std::string, int> max_ref;
            for (const auto& r : refs)
                for (const auto& [key, count] : ngram_counts(r, n))
                    max_ref[key] = std::max(max_ref[key], count);
            long long total = 0, clipped = 0;
            for (const auto& [key, count] : hyp_counts) {
                total += count;
                auto it = max_ref.find(key);
                if (it != max_ref.end()) clipped += std::min(count, it->second);
            }
            totals[n - 1] += total;
            matches[n - 1] += clipped;
        }
    }

    if (hyp_len == 0) return 0.0;
    double log_sum = 0.0;
    for (int n = 0; n < 4; ++n) {
        if (matches[n] == 0 || totals[n] == 0) return 0.0;
        log_sum += 0.25 * std::log(static_cast<double>(matches[n]) /
                                   static_cast<double>(totals[n]));
    }
    const double bp = hyp_len >= ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) /
                                               static_cast<double>(hyp_len));
    return bp * std::exp(log_sum);
}

// --- CIDEr -----------------------------------------------------------------

namespace {

struct CiderVectors {
    // One TF-IDF vector per n (1..4).
    std::unordered_map<std::string, double> vec[4];
    double norm[4] = {0, 0, 0, 0};
};

CiderVectors tfidf_vectors(const Tokens& tokens,
                           const std::unordered_map<std::string, int>* df, double log_videos) {
    CiderVectors out;
    for (int n = 1; n <= 4; ++n) {
        for (const auto& [key, count] : ngram_counts(tokens, n)) {
            double idf = log_videos;
            if (auto it = df[n - 1].find(key); it != df[n - 1].end())
                idf = log_videos - std::log(std::max(1.0, static_cast<double>(it->second)));
            const double w = static_cast<double>(count) * idf;
            out.vec[n - 1][key] = w;
            out.norm[n - 1] += w * w;
        }
        out.norm[n - 1] = std::sqrt(out.norm[n - 1]);
    }
    return out;
}

double cosine(const std::unordered_map<std::string, double>& a, double na,
              const std::unordered_map<std::string, double>& b, double nb) {
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    double dot = 0.0;
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    for (const auto& [key, v] : small) {
        auto it = large.find(key);
        if (it != large.end()) dot += v * it->second;
    }
    return dot / (na * nb);
}

double cider_for_video(const Tokens& hyp, const std::vector<Tokens>& refs,
                       const std::unordered_map<std::string, int>* df, double log_videos) {
    const CiderVectors hv = tfidf_vectors(hyp, df, log_videos);
    double sum_n = 0.0;
    for (int n = 0; n < 4; ++n) {
        double sum_refs = 0.0;
        for (const auto& r : refs) {
            const CiderVectors rv = tfidf_vectors(r, df, log_videos);
            sum_refs += cosine(hv.vec[n], hv.norm[n], rv.vec[n], rv.norm[n]);
        }
        sum_n += sum_refs / static_cast<double>(refs.size());
    }
    return 10.0 * sum_n / 4.0;
}

}  // namespace

double cider(const std::vector<Tokens>& hypotheses,
             const std::vector<std::vector<Tokens>>& references) {
    if (hypotheses.empty()) throw InputError("cider: empty hypothesis set");
    if (hypotheses.size() != references.size())
        throw InputError("cider: hypothesis and reference counts differ");

    std::vector<Tokens> hyps;
    std::vector<std::vector<Tokens>> refs;
    hyps.reserve(hypotheses.size());
    for (const auto& h : hypotheses) hyps.push_back(lowercase_all(h));
    for (const auto& rlist : references) {
        if (rlist.empty()) throw InputError("cider: a hypothesis has no references");
        std::vector<Tokens> low;
        for (const auto& r : rlist) low.push_back(lowercase_all(r));
        refs.push_back(std::move(low));
    }

    // Document frequency: number of videos whose reference set contains the
    // n-gram.
    std::unordered_map<std::string, int> df[4];
    for (const auto& rlist : refs) {
        for (int n = 1; n <= 4; ++n) {
            std::unordered_map<std::string, int> seen;
            for (const auto& r : rlist)
                for (const auto& [key, count] : ngram_counts(r, n)) seen[key] = 1;
            for (const auto& [key, one] : seen) df[n - 1][key] += one;
        }
    }
    const double log_videos = std::log(static_cast<double>(hyps.size()));

    double total = 0.0;
    for (size_t i = 0; i < hyps.size(); ++i)
        total += cider_for_video(hyps[i], refs[i], df, log_videos);
    return total / static_cast<double>(hyps.size());
}

// --- METEOR ------------------------------------------------------------------

namespace {

double meteor_single(const Tokens& hyp, const Tokens& ref) {
    const size_t hn = hyp.size(), rn = ref.size();
    if (hn == 0 || rn == 0) return 0.0;

    std::vector<int> match(hn, -1);
    std::vector<bool> ref_used(rn, false);

    // Stage 1: exact matches, hypothesis order, earliest free reference slot.
    for (size_t i = 0; i < hn; ++i) {
        for (size_t j = 0; j < rn; ++j) {
            if (!ref_used[j] && hyp[i] == ref[j]) {
                match[i] = static_cast<int>(j);
                ref_used[j] = true;
                break;
            }
        }
    }
    // Stage 2: stem matches for what is left.
    std::vector<std::string> ref_stems(rn);
    for (size_t j = 0; j < rn; ++j) ref_stems[j] = porter_stem(ref[j]);
    for (size_t i = 0; i < hn; ++i) {
        if (match[i] >= 0) continue;
        const std::string stem = porter_stem(hyp[i]);
        for (size_t j = 0; j < rn; ++j) {
            if (!ref_used[j] && stem == ref_stems[j]) {
                match[i] = static_cast<int>(j);
                ref_used[j] = true;
                break;
            }
        }
    }

    int matches = 0;
    for (size_t i = 0; i < hn; ++i)
        if (match[i] >= 0) ++matches;
    if (matches == 0) return 0.0;

    int chunks = 0;
    int prev_i = -10, prev_j = -10;
    for (size_t i = 0; i < hn; ++i) {
        if (match[i] < 0) continue;
        if (static_cast<int>(i) != prev_i + 1 || match[i] != prev_j + 1) ++chunks;
        prev_i = static_cast<int>(i);
        prev_j = match[i];
    }

    const double p = static_cast<double>(matches) / static_cast<double>(hn);
    const double r = static_cast<double>(matches) / static_cast<double>(rn);
    const double f = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(chunks) / static_cast<double>(matches);
    const double penalty = 0.5 * frag * frag * frag;
    return f * (1.0 - penalty);
}

}  // namespace

double meteor_lite(const Tokens& hypothesis, const std::vector<Tokens>& references) {
    if (references.empty()) throw InputError("meteor_lite: no references");
    const Tokens hyp = lowercase_all(hypothesis);
    double best = 0.0;
    for (const auto& ref : references)
        best = std::max(best, meteor_single(hyp, lowercase_all(ref)));
    return best;
}

// --- corpus evaluation -------------------------------------------------------

EvaluationReport evaluate_corpus(
    const std::map<std::string, std::string>& hypotheses,
    const std::map<std::string, std::vector<std::string>>& references) {
    if (hypotheses.empty()) throw InputError("evaluate: no hypotheses");
    for (const auto& [id, text] : hypotheses)
        if (!references.count(id))
            throw InputError("evaluate: no references for video '" + id + "'");
    for (const auto& [id, refs] : references)
        if (!hypotheses.count(id))
            throw InputError("evaluate: no hypothesis for video '" + id + "'");

    std::vector<std::string> ids;
    std::vector<Tokens> hyp_tokens;
    std::vector<std::vector<Tokens>> ref_tokens;
    for (const auto& [id, text] : hypotheses) {
        ids.push_back(id);
        hyp_tokens.push_back(tokenize(to_lower(text)));
        std::vector<Tokens> refs;
        for (const auto& r : references.at(id)) refs.push_back(tokenize(to_lower(r)));
        if (refs.empty()) throw InputError("evaluate: empty reference list for '" + id + "'");
        ref_tokens.push_back(std::move(refs));
    }

    // Per-video CIDEr must share the corpus document frequencies, so the
    // per-video value is the corpus formula applied to a single video with
    // df and |I| from the whole run.
    std::unordered_map<std::string, int> df[4];
    for (const auto& rlist : ref_tokens) {
        for (int n = 1; n <= 4; ++n) {
            std::unordered_map<std::string, int> seen;
            for (const auto& r : rlist)
                for (const auto& [key, count] : ngram_counts(r, n)) seen[key] = 1;
            for (const auto& [key, one] : seen) df[n - 1][key] += one;
        }
    }
    const double log_videos = std::log(static_cast<double>(ids.size()));

    EvaluationReport report;
    double cider_sum = 0.0, meteor_sum = 0.0;
    for (size_t i = 0; i < ids.size(); ++i) {
        EvaluationReport::Row row;
        row.video_id = ids[i];
        row.bleu4 = bleu4({hyp_tokens[i]}, {ref_tokens[i]});
        row.cider = cider_for_video(hyp_tokens[i], ref_tokens[i], df, log_videos);
        row.meteor_lite = meteor_lite(hyp_tokens[i], ref_tokens[i]);
        cider_sum += row.cider;
        meteor_sum += row.meteor_lite;
        report.per_video.push_back(std::move(row));
    }
    report.bleu4 = bleu4(hyp_tokens, ref_tokens);
    report.cider = cider_sum / static_cast<double>(ids.size());
    report.meteor_lite = meteor_sum / static_cast<double>(ids.size());
    return report;
}

std::string report_to_json(const EvaluationReport& ours, const EvaluationReport* baseline) {
    auto to_json = [](const EvaluationReport& r) {
        json per_video = json::array();
        for (const auto& row : r.per_video)
            per_video.push_back({{"video_id", row.video_id},
                                 {"bleu4", row.bleu4},
                                 {"cider", row.cider},
                                 {"meteor", row.meteor_lite}});
        return json{{"corpus",
                     {{"bleu4", r.bleu4}, {"cider", r.cider}, {"meteor", r.meteor_lite}}},
                    {"per_video", per_video}};
    };
    json j{{"ours", to_json(ours)}};
    if (baseline) j["baseline"] = to_json(*baseline);
    return j.dump(2) + "\n";
}

std::string report_to_table(const EvaluationReport& ours, const EvaluationReport* baseline) {
    std::ostringstream out;
    out << std::left << std::setw(12) << "Model" << std::right << std::setw(8) << "BLEU-4"
        << std::setw(8) << "CIDEr" << std::setw(8) << "METEOR" << "\n";
    auto row = [&](const std::string& name, const EvaluationReport& r) {
        out << std::left << std::setw(12) << name << std::right << std::fixed
            << std::setprecision(3) << std::setw(8) << r.bleu4 << std::setw(8) << r.cider
            << std::setw(8) << r.meteor_lite << "\n";
    };
    if (baseline) row("Mid-frame", *baseline);
    row("Ours", ours);
    return out.str();
}

std::map<std::string, std::vector<std::string>> references_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError("references file: invalid JSON");
    if (!j.is_object()) throw InputError("references file: expected an object");
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [id, refs] : j.items()) {
        if (!refs.is_array())
            throw InputError("references file: value for '" + id + "' must be an array");
        std::vector<std::string> list = refs.get<std::vector<std::string>>();
        if (list.empty())
            throw InputError("references file: video '" + id + "' has no references");
        out.emplace(id, std::move(list));
    }
    return out;
}

}  // namespace storycap::metrics
