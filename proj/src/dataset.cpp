#include "compresslab/dataset.hpp"

#include <fstream>
#include <unordered_set>

#include "compresslab/errors.hpp"

namespace compresslab {
namespace {

std::string required_string(const Json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw DatasetError(line, std::string("missing key \"") + key + "\"");
    if (!it->is_string()) throw DatasetError(line, std::string("key \"") + key + "\" must be a string");
    return it->get<std::string>();
}

}  // namespace

std::vector<QARecord> parse_dataset(std::istream& in) {
    std::vector<QARecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;

        Json obj;
        try {
            obj = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw DatasetError(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) throw DatasetError(line_no, "expected a JSON object");

        QARecord rec;
        rec.id = required_string(obj, "id", line_no);
        rec.context = required_string(obj, "context", line_no);
        rec.query = required_string(obj, "query", line_no);
        rec.gold_answer = required_string(obj, "gold_answer", line_no);
        if (auto it = obj.find("source_tag"); it != obj.end() && it->is_string()) rec.source_tag = it->get<std::string>();

        if (rec.context.empty()) throw DatasetError(line_no, "context must be non-empty");
        if (rec.query.empty()) throw DatasetError(line_no, "query must be non-empty");
        if (!seen.insert(rec.id).second) throw DatasetError(line_no, "duplicate id \"" + rec.id + "\"");
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<QARecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError(0, "cannot open dataset " + path.string());
    return parse_dataset(in);
}

void write_dataset(std::ostream& out, const std::vector<QARecord>& records) {
    for (const auto& r : records) out << Json(r).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const std::vector<QARecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write dataset " + path.string());
    write_dataset(out, records);
}

}  // namespace compresslab
