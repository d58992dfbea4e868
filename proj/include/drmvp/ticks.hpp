#pragma once
// Tick panel shared by the simulator and the spot estimators.
// Timestamps are fractions of a trading day in [0,1]; the `day` index makes a
// day slice self-contained (its first observation repeats the prior close).

#include <string>
#include <vector>

namespace drmvp {

struct TickSeries {
    std::vector<double> frac;
    std::vector<double> price;   // log prices
};

struct TickPanel {
    int p = 0;
    int days = 0;
    std::vector<std::vector<TickSeries>> data;   // [day][asset]

    void init(int p_, int days_) {
        p = p_;
        days = days_;
        data.assign(static_cast<size_t>(days), std::vector<TickSeries>(static_cast<size_t>(p)));
    }
};

void write_ticks_csv(const std::string& path, const TickPanel& panel,
                     const std::vector<std::string>& comments = {});
TickPanel read_ticks_csv(const std::string& path);

} // namespace drmvp
