#include "compresslab/run_record.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "compresslab/errors.hpp"

namespace compresslab {

std::string to_jsonl_line(const RunRecord& r) {
    nlohmann::ordered_json j;
    j["run_id"] = r.run_id;
    j["seed"] = r.seed;
    j["record_id"] = r.record_id;
    j["sample_index"] = r.sample_index;
    j["compression_text"] = r.compression_text;
    j["output_tokens"] = r.output_tokens;
    j["prediction"] = r.prediction;
    j["judgment"] = r.judgment ? nlohmann::ordered_json(*r.judgment) : nlohmann::ordered_json(nullptr);
    j["perplexity"] = r.perplexity ? nlohmann::ordered_json(*r.perplexity) : nlohmann::ordered_json(nullptr);
    auto usage = nlohmann::ordered_json::array();
    for (const auto& u : r.usage) {
        usage.push_back({{"model", u.model_name}, {"prompt_tokens", u.prompt_tokens}, {"output_tokens", u.output_tokens}});
    }
    j["usage"] = std::move(usage);
    j["ts_start"] = r.ts_start;
    j["ts_end"] = r.ts_end;
    return j.dump();
}

RunRecord run_record_from_json(const Json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.record_id = j.at("record_id").get<std::string>();
    r.sample_index = j.at("sample_index").get<int>();
    r.compression_text = j.at("compression_text").get<std::string>();
    r.output_tokens = j.at("output_tokens").get<std::int64_t>();
    r.prediction = j.at("prediction").get<std::string>();
    if (const auto& v = j.at("judgment"); !v.is_null()) r.judgment = v.get<bool>();
    if (const auto& v = j.at("perplexity"); !v.is_null()) r.perplexity = v.get<double>();
    if (r.judgment.has_value() == r.perplexity.has_value()) {
        throw DatasetError(0, "exactly one of judgment / perplexity must be set");
    }
    for (const auto& u : j.at("usage")) r.usage.push_back(u.get<GenerationTrace>());
    r.ts_start = j.value("ts_start", std::string{});
    r.ts_end = j.value("ts_end", std::string{});
    return r;
}

std::vector<RunRecord> read_run_records(const std::filesystem::path& path) {
    std::vector<RunRecord> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string data = buf.str();

    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < data.size()) {
        const auto nl = data.find('\n', pos);
        ++line_no;
        if (nl == std::string::npos) break;  // torn tail, never fsynced as a full record
        const std::string_view line(data.data() + pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        try {
            out.push_back(run_record_from_json(Json::parse(line)));
        } catch (const Json::exception& e) {
            throw DatasetError(line_no, path.string() + ": corrupt run record: " + e.what());
        } catch (const DatasetError& e) {
            throw DatasetError(line_no, path.string() + ": " + e.what());
        }
    }
    return out;
}

RunRecordWriter::RunRecordWriter(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw Error("cannot open " + path.string() + ": " + std::strerror(errno));

    // Drop a torn trailing line so the next append starts on a fresh line.
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (!ec && size > 0) {
        std::ifstream in(path, std::ios::binary);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (data.back() != '\n') {
            const auto nl = data.rfind('\n');
            const auto keep = nl == std::string::npos ? 0 : nl + 1;
            if (::ftruncate(fd_, static_cast<off_t>(keep)) != 0) {
                throw Error("cannot truncate torn record in " + path.string());
            }
        }
    }
    if (::lseek(fd_, 0, SEEK_END) < 0) throw Error("cannot seek " + path.string());
}

RunRecordWriter::~RunRecordWriter() {
    if (fd_ >= 0) ::close(fd_);
}

void RunRecordWriter::append(const RunRecord& r) {
    const std::string line = to_jsonl_line(r) + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(fd_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error(std::string("run record write failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error(std::string("fsync failed: ") + std::strerror(errno));
}

std::string utc_timestamp_now() {
    using namespace std::chrono;
    const auto now = system_clock::now();
    const auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

}  // namespace compresslab
