#include "storycap/connective_bank.hpp"

#include <json.hpp>

#include "storycap/errors.hpp"

namespace storycap {

using nlohmann::json;

std::string bank_to_json(const std::vector<ConnectiveInstance>& bank) {
    json arr = json::array();
    for (const auto& inst : bank)
        arr.push_back({{"connective", inst.connective}, {"vec", inst.context_vector}});
    return arr.dump(2) + "\n";
}

std::vector<ConnectiveInstance> bank_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw InputError("bank file: invalid JSON");
    if (!j.is_array()) throw InputError("bank file: expected a JSON array");
    std::vector<ConnectiveInstance> bank;
    size_t dim = 0;
    for (size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        const std::string where = "bank file entry " + std::to_string(i);
        if (!e.contains("connective") || !e["connective"].is_string())
            throw InputError(where + ": missing string field 'connective'");
        if (!e.contains("vec") || !e["vec"].is_array())
            throw InputError(where + ": missing array field 'vec'");
        ConnectiveInstance inst;
        inst.connective = e["connective"].get<std::string>();
        inst.context_vector = e["vec"].get<std::vector<double>>();
        if (i == 0) {
            dim = inst.context_vector.size();
        } else if (inst.context_vector.size() != dim) {
            throw InputError(where + ": field 'vec' has dimension " +
                             std::to_string(inst.context_vector.size()) + ", expected " +
                             std::to_string(dim));
        }
        bank.push_back(std::move(inst));
    }
    return bank;
}

}  // namespace storycap
