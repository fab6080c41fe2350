#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace accosim {

struct CheckRow {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    bool pass = false;
    std::string detail;
};

struct SuiteReport {
    std::string suite;
    std::vector<CheckRow> checks;

    bool pass() const {
        for (const CheckRow& c : checks)
            if (!c.pass) return false;
        return true;
    }
    nlohmann::json to_json() const;
};

const std::vector<std::string>& suite_names();

// Runs one named verification suite; throws std::invalid_argument for an
// unknown name. Suites: lyapunov, prop1, prop2, memory, collectives,
// shard-equivalence, acco-gd-equivalence, heterogeneous.
SuiteReport run_suite(const std::string& name);

}  // namespace accosim
