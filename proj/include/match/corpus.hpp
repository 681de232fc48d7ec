#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "match/common.hpp"

namespace match {

// SOC major groups: 23 named 2-digit codes plus 0 = unknown.
extern const std::vector<int> kSocMajorCodes;  // size 24, first entry 0
const std::string& soc_major_name(int code);

struct WorkSpan {
    std::string title;
    int title_entity = -1;
    int start_year = 0;
    int end_year = 0;
};

struct JobPost {
    std::string id;
    std::string title;
    int title_entity = -1;
    int soc_major = 0;
    std::vector<int> skills;  // sorted, unique
    std::string description_text;
    std::string requirement_text;
    double lat = 0.0;
    double lon = 0.0;
    bool is_remote = false;
    double required_years = 0.0;
    int required_education = 0;  // 0 none .. 4 graduate
};

struct CandidateProfile {
    std::string id;
    std::string recent_title;
    int title_entity = -1;
    std::vector<int> skills;
    std::string resume_text;
    std::vector<WorkSpan> work_history;
    double lat = 0.0;
    double lon = 0.0;
    double years_experience = 0.0;
    int education_level = 0;
    int soc_major = 0;
};

struct Application {
    std::string candidate_id;
    std::string job_id;
};

struct PlantedPair {
    std::string job_id;
    std::string candidate_id;
};

struct Corpus {
    std::vector<JobPost> jobs;
    std::vector<CandidateProfile> candidates;
    std::vector<Application> applications;
    std::vector<PlantedPair> ground_truth;  // empty when not available

    std::unordered_map<std::string, std::size_t> job_index;
    std::unordered_map<std::string, std::size_t> candidate_index;

    void rebuild_indices();
    const JobPost& job(const std::string& id) const;
    const CandidateProfile& candidate(const std::string& id) const;
};

// Token -> index map. Index 0 is padding, 1 is unknown; real tokens start at 2.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocabulary() : tokens_{"<pad>", "<unk>"} {}

    int lookup(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kUnk : it->second;
    }
    int add(const std::string& token);  // idempotent
    std::size_t size() const { return tokens_.size(); }
    const std::string& token(int idx) const { return tokens_.at(static_cast<std::size_t>(idx)); }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

// Lowercase, split on non-alphanumeric runs.
std::vector<std::string> tokenize(const std::string& text);

struct SynthConfig {
    int n_jobs = 100;
    int n_candidates = 1000;
    int n_titles = 60;
    int n_skills = 200;
    int n_soc_groups = 4;
    double application_rate = 1.0;  // expected extra same-SOC applications per job
    bool planted = true;
    int text_filler_words = 12;  // filler tokens appended to each generated text
};

Corpus load_corpus(const std::string& dir);
void save_corpus(const Corpus& corpus, const std::string& dir);

Corpus generate_synthetic(const SynthConfig& config, std::uint64_t seed);

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t max_size);

// All free text of a record, used for vocabulary counts and DLEM input.
std::string job_text(const JobPost& j);
std::string candidate_text(const CandidateProfile& c);

}  // namespace match
