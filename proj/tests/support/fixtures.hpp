#pragma once

#include "veritab/table.hpp"

namespace veritab::testing {

// Championship medals table; bronze has tatiana ryabkina twice and lena
// eliasson once, in the fifth row.
inline Table medals_table() {
  return make_table(
      "medals.csv", "orienteering championships",
      {"year", "gold", "silver", "bronze"},
      {
          {"2003", "simone niggli", "jenny johansson", "tatiana ryabkina"},
          {"2005", "simone niggli", "heli jukkola", "vroni koenig"},
          {"2007", "minna kauppi", "heli jukkola", "tatiana ryabkina"},
          {"2009", "minna kauppi", "marianne andersen", "helena jansson"},
          {"2011", "annika billstam", "helena jansson", "lena eliasson"},
          {"2013", "simone niggli", "tove alexandersson", "minna kauppi"},
      },
      "fixture");
}

// Small numeric table used by interpreter unit cases.
inline Table scores_table() {
  return make_table("scores.csv", "",
                    {"name", "score", "wins"},
                    {
                        {"alpha", "3", "1"},
                        {"beta", "5", "0"},
                        {"gamma", "5", "2"},
                        {"delta", "2", "2"},
                    },
                    "fixture");
}

}  // namespace veritab::testing
