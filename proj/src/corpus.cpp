#include "match/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

namespace match {

using nlohmann::json;

// 2018 SOC major groups (22 civilian + military) plus 0 = unknown.
const std::vector<int> kSocMajorCodes = {0,  11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31,
                                         33, 35, 37, 39, 41, 43, 45, 47, 49, 51, 53, 55};

const std::string& soc_major_name(int code) {
    static const std::map<int, std::string> names = {
        {0, "Unknown"},
        {11, "Management"},
        {13, "Business and Financial Operations"},
        {15, "Computer and Mathematical"},
        {17, "Architecture and Engineering"},
        {19, "Life, Physical, and Social Science"},
        {21, "Community and Social Service"},
        {23, "Legal"},
        {25, "Educational Instruction and Library"},
        {27, "Arts, Design, Entertainment, Sports, and Media"},
        {29, "Healthcare Practitioners and Technical"},
        {31, "Healthcare Support"},
        {33, "Protective Service"},
        {35, "Food Preparation and Serving Related"},
        {37, "Building and Grounds Cleaning and Maintenance"},
        {39, "Personal Care and Service"},
        {41, "Sales and Related"},
        {43, "Office and Administrative Support"},
        {45, "Farming, Fishing, and Forestry"},
        {47, "Construction and Extraction"},
        {49, "Installation, Maintenance, and Repair"},
        {51, "Production"},
        {53, "Transportation and Material Moving"},
        {55, "Military Specific"},
    };
    auto it = names.find(code);
    if (it == names.end()) throw ParameterError("unknown SOC major code " + std::to_string(code));
    return it->second;
}

void Corpus::rebuild_indices() {
    job_index.clear();
    candidate_index.clear();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (!job_index.emplace(jobs[i].id, i).second)
            throw DataError("duplicate job id: " + jobs[i].id);
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!candidate_index.emplace(candidates[i].id, i).second)
            throw DataError("duplicate candidate id: " + candidates[i].id);
    }
}

const JobPost& Corpus::job(const std::string& id) const {
    auto it = job_index.find(id);
    if (it == job_index.end()) throw DataError("unknown job id: " + id);
    return jobs[it->second];
}

const CandidateProfile& Corpus::candidate(const std::string& id) const {
    auto it = candidate_index.find(id);
    if (it == candidate_index.end()) throw DataError("unknown candidate id: " + id);
    return candidates[it->second];
}

int Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int idx = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, idx);
    return idx;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write vocabulary: " + path);
    for (std::size_t i = 2; i < tokens_.size(); ++i) os << tokens_[i] << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DependencyError("missing vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) v.add(line);
    }
    return v;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string job_text(const JobPost& j) {
    return j.title + " " + j.description_text + " " + j.requirement_text;
}

std::string candidate_text(const CandidateProfile& c) {
    std::string s = c.recent_title + " " + c.resume_text;
    for (const auto& w : c.work_history) s += " " + w.title;
    return s;
}

// ---- JSONL load/save ----------------------------------------------------

namespace {

json parse_line(const std::string& line, const std::string& file, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError(file + ":" + std::to_string(lineno) + ": parse error: " + e.what());
    }
}

void validate_latlon(double lat, double lon, const std::string& id) {
    if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0)
        throw DataError("record " + id + ": lat/lon out of range");
}

json location_json(double lat, double lon) {
    return json{{"lat", lat}, {"lon", lon}};
}

JobPost job_from_json(const json& o) {
    JobPost j;
    j.id = o.at("id").get<std::string>();
    j.title = o.at("title").get<std::string>();
    j.title_entity = o.at("title_entity").get<int>();
    j.soc_major = o.at("soc_major").get<int>();
    j.skills = o.at("skills").get<std::vector<int>>();
    j.description_text = o.at("description_text").get<std::string>();
    j.requirement_text = o.at("requirement_text").get<std::string>();
    j.lat = o.at("location").at("lat").get<double>();
    j.lon = o.at("location").at("lon").get<double>();
    j.is_remote = o.at("is_remote").get<bool>();
    j.required_years = o.at("required_years").get<double>();
    j.required_education = o.at("required_education").get<int>();
    validate_latlon(j.lat, j.lon, j.id);
    if (j.required_education < 0 || j.required_education > 4)
        throw DataError("job " + j.id + ": required_education out of range");
    if (j.required_years < 0.0) throw DataError("job " + j.id + ": negative required_years");
    return j;
}

json job_to_json(const JobPost& j) {
    return json{{"id", j.id},
                {"title", j.title},
                {"title_entity", j.title_entity},
                {"soc_major", j.soc_major},
                {"skills", j.skills},
                {"description_text", j.description_text},
                {"requirement_text", j.requirement_text},
                {"location", location_json(j.lat, j.lon)},
                {"is_remote", j.is_remote},
                {"required_years", j.required_years},
                {"required_education", j.required_education}};
}

CandidateProfile candidate_from_json(const json& o) {
    CandidateProfile c;
    c.id = o.at("id").get<std::string>();
    c.recent_title = o.at("recent_title").get<std::string>();
    c.title_entity = o.at("title_entity").get<int>();
    c.skills = o.at("skills").get<std::vector<int>>();
    c.resume_text = o.at("resume_text").get<std::string>();
    for (const auto& w : o.at("work_history")) {
        WorkSpan span;
        span.title = w.at("title").get<std::string>();
        span.title_entity = w.at("title_entity").get<int>();
        span.start_year = w.at("start_year").get<int>();
        span.end_year = w.at("end_year").get<int>();
        if (span.start_year > span.end_year)
            throw DataError("candidate " + c.id + ": work span start > end");
        c.work_history.push_back(std::move(span));
    }
    c.lat = o.at("location").at("lat").get<double>();
    c.lon = o.at("location").at("lon").get<double>();
    c.years_experience = o.at("years_experience").get<double>();
    c.education_level = o.at("education_level").get<int>();
    c.soc_major = o.at("soc_major").get<int>();
    validate_latlon(c.lat, c.lon, c.id);
    if (c.years_experience < 0.0) throw DataError("candidate " + c.id + ": negative years_experience");
    if (c.education_level < 0 || c.education_level > 4)
        throw DataError("candidate " + c.id + ": education_level out of range");
    return c;
}

json candidate_to_json(const CandidateProfile& c) {
    json hist = json::array();
    for (const auto& w : c.work_history) {
        hist.push_back(json{{"title", w.title},
                            {"title_entity", w.title_entity},
                            {"start_year", w.start_year},
                            {"end_year", w.end_year}});
    }
    return json{{"id", c.id},
                {"recent_title", c.recent_title},
                {"title_entity", c.title_entity},
                {"skills", c.skills},
                {"resume_text", c.resume_text},
                {"work_history", hist},
                {"location", location_json(c.lat, c.lon)},
                {"years_experience", c.years_experience},
                {"education_level", c.education_level},
                {"soc_major", c.soc_major}};
}

template <typename Fn>
void for_each_line(const std::string& path, bool required, Fn&& fn) {
    std::ifstream is(path);
    if (!is) {
        if (required) throw DependencyError("missing corpus file: " + path);
        return;
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        fn(parse_line(line, path, lineno), lineno);
    }
}

}  // namespace

Corpus load_corpus(const std::string& dir) {
    Corpus corpus;
    for_each_line(dir + "/jobs.jsonl", true,
                  [&](const json& o, std::size_t) { corpus.jobs.push_back(job_from_json(o)); });
    for_each_line(dir + "/candidates.jsonl", true, [&](const json& o, std::size_t) {
        corpus.candidates.push_back(candidate_from_json(o));
    });
    corpus.rebuild_indices();

    std::set<std::pair<std::string, std::string>> seen;
    std::vector<std::string> dangling;
    for_each_line(dir + "/applications.jsonl", true, [&](const json& o, std::size_t) {
        Application a{o.at("candidate_id").get<std::string>(), o.at("job_id").get<std::string>()};
        if (!corpus.candidate_index.count(a.candidate_id)) dangling.push_back(a.candidate_id);
        if (!corpus.job_index.count(a.job_id)) dangling.push_back(a.job_id);
        if (!seen.emplace(a.candidate_id, a.job_id).second)
            throw DataError("duplicate application pair (" + a.candidate_id + ", " + a.job_id + ")");
        corpus.applications.push_back(std::move(a));
    });
    if (!dangling.empty()) {
        std::string msg = "applications reference unknown ids:";
        for (const auto& id : dangling) msg += " " + id;
        throw DataError(msg);
    }

    for_each_line(dir + "/ground_truth.jsonl", false, [&](const json& o, std::size_t) {
        corpus.ground_truth.push_back(
            {o.at("job_id").get<std::string>(), o.at("candidate_id").get<std::string>()});
    });
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& dir) {
    auto open = [&](const std::string& name) {
        std::ofstream os(dir + "/" + name);
        if (!os) throw DataError("cannot write " + dir + "/" + name);
        return os;
    };
    {
        auto os = open("jobs.jsonl");
        for (const auto& j : corpus.jobs) os << job_to_json(j).dump() << "\n";
    }
    {
        auto os = open("candidates.jsonl");
        for (const auto& c : corpus.candidates) os << candidate_to_json(c).dump() << "\n";
    }
    {
        auto os = open("applications.jsonl");
        for (const auto& a : corpus.applications)
            os << json{{"candidate_id", a.candidate_id}, {"job_id", a.job_id}}.dump() << "\n";
    }
    {
        auto os = open("ground_truth.jsonl");
        for (const auto& g : corpus.ground_truth)
            os << json{{"job_id", g.job_id}, {"candidate_id", g.candidate_id}}.dump() << "\n";
    }
}

// ---- synthetic corpus ---------------------------------------------------

namespace {

// Pronounceable pseudo-words keep the tokenizer path realistic.
std::string make_word(Rng& rng) {
    static const char* consonants = "bcdfghklmnprstvz";
    static const char* vowels = "aeiou";
    std::uniform_int_distribution<int> syl(2, 3);
    std::uniform_int_distribution<int> ci(0, 15);
    std::uniform_int_distribution<int> vi(0, 4);
    std::string w;
    int n = syl(rng);
    for (int i = 0; i < n; ++i) {
        w.push_back(consonants[ci(rng)]);
        w.push_back(vowels[vi(rng)]);
    }
    return w;
}

struct GroupCatalog {
    int soc_code = 0;
    std::vector<int> titles;           // global title indices
    std::vector<int> skills;           // global skill indices
    std::vector<std::string> fillers;  // group-specific filler words
};

std::string join(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) {
        if (!s.empty()) s += " ";
        s += w;
    }
    return s;
}

}  // namespace

Corpus generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
    if (cfg.n_jobs <= 0 || cfg.n_candidates <= 0 || cfg.n_titles <= 0 || cfg.n_skills <= 0 ||
        cfg.n_soc_groups <= 0)
        throw ConfigError("synthetic corpus counts must all be positive");
    if (cfg.n_soc_groups > 23) throw ConfigError("at most 23 SOC groups are available");
    if (cfg.n_titles < cfg.n_soc_groups || cfg.n_skills < cfg.n_soc_groups)
        throw ConfigError("need at least one title and skill per SOC group");
    if (cfg.planted && cfg.n_candidates < cfg.n_jobs)
        throw ConfigError("planted matching needs n_candidates >= n_jobs");

    Rng rng(seed);
    const int g_count = cfg.n_soc_groups;

    // Entity names, generated once per global index.
    std::vector<std::string> title_names(static_cast<std::size_t>(cfg.n_titles));
    std::vector<std::string> skill_names(static_cast<std::size_t>(cfg.n_skills));
    for (auto& t : title_names) t = make_word(rng) + " " + make_word(rng);
    for (auto& s : skill_names) s = make_word(rng);

    // Disjoint per-group sub-catalogs (contiguous slices).
    std::vector<GroupCatalog> groups(static_cast<std::size_t>(g_count));
    for (int g = 0; g < g_count; ++g) {
        auto& gc = groups[static_cast<std::size_t>(g)];
        gc.soc_code = kSocMajorCodes[static_cast<std::size_t>(g + 1)];
        int t0 = g * cfg.n_titles / g_count, t1 = (g + 1) * cfg.n_titles / g_count;
        int s0 = g * cfg.n_skills / g_count, s1 = (g + 1) * cfg.n_skills / g_count;
        for (int t = t0; t < t1; ++t) gc.titles.push_back(t);
        for (int s = s0; s < s1; ++s) gc.skills.push_back(s);
        for (int i = 0; i < 30; ++i) gc.fillers.push_back(make_word(rng));
    }

    auto pick = [&](const std::vector<int>& v) {
        return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
    };
    auto pick_word = [&](const std::vector<std::string>& v) {
        return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
    };

    auto make_text = [&](const GroupCatalog& gc, int title, const std::vector<int>& skills) {
        std::vector<std::string> words;
        words.push_back(title_names[static_cast<std::size_t>(title)]);
        for (int s : skills) words.push_back(skill_names[static_cast<std::size_t>(s)]);
        for (int i = 0; i < cfg.text_filler_words; ++i) words.push_back(pick_word(gc.fillers));
        return join(words);
    };

    std::uniform_real_distribution<double> lat_d(25.0, 48.0), lon_d(-122.0, -71.0);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Corpus corpus;
    for (int i = 0; i < cfg.n_jobs; ++i) {
        int g = i % g_count;
        const auto& gc = groups[static_cast<std::size_t>(g)];
        JobPost j;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "job-%06d", i);
        j.id = buf;
        j.title_entity = pick(gc.titles);
        j.title = title_names[static_cast<std::size_t>(j.title_entity)];
        j.soc_major = gc.soc_code;
        std::set<int> sk;
        int n_sk = std::uniform_int_distribution<int>(3, 6)(rng);
        while (static_cast<int>(sk.size()) < std::min<int>(n_sk, static_cast<int>(gc.skills.size())))
            sk.insert(pick(gc.skills));
        j.skills.assign(sk.begin(), sk.end());
        j.lat = lat_d(rng);
        j.lon = lon_d(rng);
        j.is_remote = unit(rng) < 0.1;
        j.required_years = std::uniform_int_distribution<int>(0, 10)(rng);
        j.required_education = std::uniform_int_distribution<int>(0, 4)(rng);
        j.description_text = make_text(gc, j.title_entity, j.skills);
        j.requirement_text = make_text(gc, j.title_entity, j.skills);
        corpus.jobs.push_back(std::move(j));
    }

    auto make_history = [&](const GroupCatalog& gc, int recent_title) {
        std::vector<WorkSpan> hist;
        int n = std::uniform_int_distribution<int>(2, 3)(rng);
        int year = 2002;
        std::vector<int> entities;
        for (int i = 0; i + 1 < n; ++i) entities.push_back(pick(gc.titles));
        entities.push_back(recent_title);
        for (int e : entities) {
            WorkSpan w;
            w.title_entity = e;
            w.title = title_names[static_cast<std::size_t>(e)];
            w.start_year = year;
            year += std::uniform_int_distribution<int>(2, 6)(rng);
            w.end_year = year;
            hist.push_back(std::move(w));
        }
        return hist;
    };

    int cand_no = 0;
    auto cand_id = [&]() {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "cand-%06d", cand_no++);
        return std::string(buf);
    };

    if (cfg.planted) {
        for (const auto& j : corpus.jobs) {
            int g = 0;
            while (groups[static_cast<std::size_t>(g)].soc_code != j.soc_major) ++g;
            const auto& gc = groups[static_cast<std::size_t>(g)];
            CandidateProfile c;
            c.id = cand_id();
            c.title_entity = j.title_entity;
            c.recent_title = title_names[static_cast<std::size_t>(c.title_entity)];
            c.skills = j.skills;
            c.lat = std::clamp(j.lat + jitter(rng), -90.0, 90.0);
            c.lon = std::clamp(j.lon + jitter(rng), -180.0, 180.0);
            c.years_experience = j.required_years + std::uniform_int_distribution<int>(0, 4)(rng);
            c.education_level = std::uniform_int_distribution<int>(j.required_education, 4)(rng);
            c.soc_major = j.soc_major;
            c.resume_text = make_text(gc, c.title_entity, c.skills);
            c.work_history = make_history(gc, c.title_entity);
            corpus.ground_truth.push_back({j.id, c.id});
            corpus.candidates.push_back(std::move(c));
        }
    }
    while (static_cast<int>(corpus.candidates.size()) < cfg.n_candidates) {
        int g = std::uniform_int_distribution<int>(0, g_count - 1)(rng);
        const auto& gc = groups[static_cast<std::size_t>(g)];
        CandidateProfile c;
        c.id = cand_id();
        c.title_entity = pick(gc.titles);
        c.recent_title = title_names[static_cast<std::size_t>(c.title_entity)];
        std::set<int> sk;
        int n_sk = std::uniform_int_distribution<int>(3, 6)(rng);
        while (static_cast<int>(sk.size()) < std::min<int>(n_sk, static_cast<int>(gc.skills.size())))
            sk.insert(pick(gc.skills));
        c.skills.assign(sk.begin(), sk.end());
        c.lat = lat_d(rng);
        c.lon = lon_d(rng);
        c.years_experience = std::uniform_int_distribution<int>(0, 20)(rng);
        c.education_level = std::uniform_int_distribution<int>(0, 4)(rng);
        c.soc_major = gc.soc_code;
        c.resume_text = make_text(gc, c.title_entity, c.skills);
        c.work_history = make_history(gc, c.title_entity);
        corpus.candidates.push_back(std::move(c));
    }
    corpus.rebuild_indices();

    // Applications: every planted pair applies, plus random same-SOC pairs.
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& g : corpus.ground_truth) {
        seen.emplace(g.candidate_id, g.job_id);
        corpus.applications.push_back({g.candidate_id, g.job_id});
    }
    // Bucket candidates by SOC for same-SOC sampling.
    std::map<int, std::vector<std::size_t>> by_soc;
    for (std::size_t i = 0; i < corpus.candidates.size(); ++i)
        by_soc[corpus.candidates[i].soc_major].push_back(i);
    for (const auto& j : corpus.jobs) {
        const auto& pool = by_soc[j.soc_major];
        int extra = static_cast<int>(std::floor(cfg.application_rate));
        if (unit(rng) < cfg.application_rate - std::floor(cfg.application_rate)) ++extra;
        for (int e = 0; e < extra && !pool.empty(); ++e) {
            const auto& c =
                corpus.candidates[pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]];
            if (seen.emplace(c.id, j.id).second) corpus.applications.push_back({c.id, j.id});
        }
    }

    // Active candidates keep richer profiles than passive ones: every
    // applier gets a few extra profile words drawn from a shared vocabulary,
    // so application behavior is reflected in the resume text itself.
    std::vector<std::string> active_vocab;
    for (int i = 0; i < 30; ++i) active_vocab.push_back(make_word(rng));
    std::set<std::string> appliers;
    for (const auto& a : corpus.applications) appliers.insert(a.candidate_id);
    for (auto& c : corpus.candidates) {
        if (!appliers.count(c.id)) continue;
        std::vector<std::string> extra;
        for (int i = 0; i < 8; ++i) extra.push_back(pick_word(active_vocab));
        c.resume_text += " " + join(extra);
    }
    return corpus;
}

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t max_size) {
    if (max_size < 3) throw ParameterError("vocabulary max_size must be >= 3");
    std::map<std::string, std::uint64_t> counts;
    auto count_text = [&](const std::string& text) {
        for (auto& tok : tokenize(text)) ++counts[tok];
    };
    for (const auto& j : corpus.jobs) count_text(job_text(j));
    for (const auto& c : corpus.candidates) count_text(candidate_text(c));

    std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary v;
    for (const auto& [tok, cnt] : ranked) {
        if (v.size() >= max_size) break;
        v.add(tok);
    }
    return v;
}

std::uint64_t hash_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DependencyError("cannot hash missing file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is) {
        is.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace match
