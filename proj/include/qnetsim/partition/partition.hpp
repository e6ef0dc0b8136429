#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/event.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace qnetsim::part
{
    /// Total assignment of routers (by id) to workers in [0, num_workers).
    struct Partition
    {
        std::size_t num_workers = 1;
        std::vector<WorkerId> assignment;

        WorkerId owner(EntityId router) const { return assignment.at(router); }
        std::size_t routers() const noexcept { return assignment.size(); }

        std::vector<std::size_t> loads() const
        {
            std::vector<std::size_t> out(num_workers, 0);
            for (WorkerId w : assignment)
                ++out[w];
            return out;
        }

        bool operator==(const Partition&) const = default;

        static Partition round_robin(std::size_t routers, std::size_t workers)
        {
            Partition p;
            p.num_workers = workers;
            p.assignment.resize(routers);
            for (std::size_t i = 0; i < routers; ++i)
                p.assignment[i] = static_cast<WorkerId>(i % workers);
            return p;
        }
    };

    inline void validate(const Partition& p, std::optional<std::size_t> expected_routers = std::nullopt)
    {
        if (p.num_workers == 0)
            throw Error(ErrorCode::SchemaViolation, "num_workers must be positive");
        if (expected_routers && p.assignment.size() != *expected_routers)
            throw Error(ErrorCode::SchemaViolation, "partition covers " + std::to_string(p.assignment.size()) +
                                                        " routers, topology has " + std::to_string(*expected_routers));
        for (std::size_t r = 0; r < p.assignment.size(); ++r)
            if (p.assignment[r] >= p.num_workers)
                throw Error(ErrorCode::SchemaViolation, "router " + std::to_string(r) + " assigned to worker " +
                                                            std::to_string(p.assignment[r]) + " >= num_workers");
    }

    inline nlohmann::json to_json(const Partition& p)
    {
        nlohmann::json assignment = nlohmann::json::object();
        for (std::size_t r = 0; r < p.assignment.size(); ++r)
            assignment[std::to_string(r)] = p.assignment[r];
        return {{"num_workers", p.num_workers}, {"assignment", assignment}};
    }

    inline Partition partition_from_json(const nlohmann::json& j, std::optional<std::size_t> expected_routers = std::nullopt)
    {
        auto bad = [](const std::string& what) { return Error(ErrorCode::SchemaViolation, what); };
        if (!j.is_object() || !j.contains("num_workers") || !j.contains("assignment"))
            throw bad("partition needs \"num_workers\" and \"assignment\"");
        if (!j.at("num_workers").is_number_unsigned())
            throw bad("\"num_workers\" must be a non-negative integer");
        const auto& a = j.at("assignment");
        if (!a.is_object())
            throw bad("\"assignment\" must be an object");
        Partition p;
        p.num_workers = j.at("num_workers").get<std::size_t>();
        std::vector<std::optional<WorkerId>> slots(a.size());
        for (const auto& [key, value] : a.items())
        {
            std::size_t router = 0;
            try
            {
                std::size_t used = 0;
                router = std::stoul(key, &used);
                if (used != key.size())
                    throw std::invalid_argument(key);
            }
            catch (const std::exception&)
            {
                throw bad("assignment key '" + key + "' is not a router id");
            }
            if (router >= slots.size())
                throw bad("router " + key + " is out of range, so a lower router id is missing");
            if (!value.is_number_unsigned())
                throw bad("worker for router " + key + " must be a non-negative integer");
            slots[router] = value.get<WorkerId>();
        }
        for (std::size_t r = 0; r < slots.size(); ++r)
        {
            if (!slots[r])
                throw bad("router " + std::to_string(r) + " missing from assignment");
            p.assignment.push_back(*slots[r]);
        }
        validate(p, expected_routers);
        return p;
    }

    inline Partition load_partition(const std::string& path, std::optional<std::size_t> expected_routers = std::nullopt)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(ErrorCode::InvalidParameter, "cannot open partition file " + path);
        nlohmann::json j;
        try
        {
            in >> j;
        }
        catch (const nlohmann::json::parse_error& e)
        {
            throw Error(ErrorCode::SchemaViolation, std::string("partition is not valid JSON: ") + e.what());
        }
        return partition_from_json(j, expected_routers);
    }

    inline void save_partition(const Partition& p, const std::string& path)
    {
        validate(p);
        std::ofstream out(path);
        if (!out)
            throw Error(ErrorCode::InvalidParameter, "cannot write " + path);
        out << to_json(p).dump(2) << '\n';
    }
} // namespace qnetsim::part
