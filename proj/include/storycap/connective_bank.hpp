#pragma once

#include <string>
#include <vector>

namespace storycap {

// A transition word mined from a corpus together with the embedding of the
// sentence pair it came from (connective removed). All vectors in one bank
// share the same dimension.
struct ConnectiveInstance {
    std::string connective;
    std::vector<double> context_vector;
    std::string source_pair_id;
};

// Bank file format: JSON array of {"connective": str, "vec": [float, ...]}.
std::string bank_to_json(const std::vector<ConnectiveInstance>& bank);
std::vector<ConnectiveInstance> bank_from_json(const std::string& text);

}  // namespace storycap
