#ifndef RSC_REPORT_HPP
#define RSC_REPORT_HPP

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "rsc/count.hpp"
#include "rsc/extremality.hpp"
#include "rsc/metrics.hpp"

namespace rsc {

// All counts are rendered as decimal strings. include_timing=false drops the
// elapsed-time field so identical invocations emit identical bytes.
nlohmann::json count_report_json(const CountReport& r, bool include_timing);
std::string    count_report_text(const CountReport& r, bool include_timing);

nlohmann::json extremality_report_json(const ExtremalityReport& r, const std::string& digest);
std::string    extremality_report_text(const ExtremalityReport& r, const std::string& digest);

struct MetricsReport {
    std::string     task_digest;
    std::size_t     rows = 0;
    double          f1_labels = 0.0;
    double          f1_concepts = 0.0;
    double          cls = 0.0;
    bool            has_beta = false;
    double          f1_beta = 0.0;
    AlignmentResult alignment;
};

nlohmann::json metrics_report_json(const MetricsReport& r);
std::string    metrics_report_text(const MetricsReport& r);

} // namespace rsc

#endif
