"""Benchmark table fixture data for aggregation arithmetic tests.

Per (benchmark, model): three per-run measurements for time (minutes), cost
(USD), and score (percent) in each mode, plus the printed per-mode averages
and the printed tool-reuse vs zero-shot percent deltas, transcribed from
the published run tables.

Shape: runs[mode] = [r1, r2, r3]; printed_avg[mode] = value;
printed_delta[metric] = percent.
"""

QC = "quantum_chemistry"
QD = "quantum_dynamics"

TABLES = {
    QC: {
        "Claude Opus 4.6": {
            "time": {"zs": [81.5, 77.6, 71.5], "tr": [93.2, 52.1, 54.5], "eo": [66.3, 79.7, 76.0]},
            "cost": {"zs": [5.98, 5.25, 5.44], "tr": [4.51, 1.73, 1.84], "eo": [1.43, 1.81, 1.59]},
            "score": {"zs": [88.0, 81.2, 90.7], "tr": [90.3, 88.4, 85.1], "eo": [78.7, 83.9, 78.5]},
            "printed_avg": {
                "time": {"zs": 76.8, "tr": 66.6, "eo": 74.0},
                "cost": {"zs": 5.56, "tr": 2.69, "eo": 1.61},
                "score": {"zs": 86.6, "tr": 87.9, "eo": 80.4},
            },
            "printed_delta": {"time": -13.3, "cost": -51.5},
        },
        "Claude Sonnet 4.6": {
            "time": {"zs": [115.3, 69.6, 61.0], "tr": [73.2, 50.3, 65.2], "eo": [63.2, 53.6, 75.7]},
            "cost": {"zs": [7.02, 2.62, 2.84], "tr": [5.33, 1.82, 1.20], "eo": [0.97, 1.07, 1.17]},
            "score": {"zs": [83.6, 86.5, 85.9], "tr": [84.2, 86.3, 82.8], "eo": [85.2, 85.0, 82.4]},
            "printed_avg": {
                "time": {"zs": 82.0, "tr": 62.9, "eo": 64.2},
                "cost": {"zs": 4.16, "tr": 2.78, "eo": 1.07},
                "score": {"zs": 85.4, "tr": 84.4, "eo": 84.2},
            },
            "printed_delta": {"time": -23.3, "cost": -33.2},
        },
        "GPT-5.2-Codex": {
            "time": {"zs": [121.4, 130.5, 105.5], "tr": [82.4, 148.9, 127.6], "eo": [191.4, 261.8, 100.3]},
            "cost": {"zs": [2.31, 2.36, 1.92], "tr": [0.97, 1.07, 0.85], "eo": [0.91, 1.12, 0.78]},
            "score": {"zs": [86.2, 83.0, 80.3], "tr": [89.2, 85.3, 89.8], "eo": [73.4, 81.8, 76.0]},
            "printed_avg": {
                "time": {"zs": 119.1, "tr": 119.6, "eo": 184.5},
                "cost": {"zs": 2.20, "tr": 0.96, "eo": 0.94},
                "score": {"zs": 83.2, "tr": 88.1, "eo": 77.1},
            },
            "printed_delta": {"time": 0.4, "cost": -56.2},
        },
        "Gemini 3.1 Pro": {
            "time": {"zs": [130.0, 138.9, 132.2], "tr": [96.1, 73.8, 149.7], "eo": [105.2, 106.8, 235.7]},
            "cost": {"zs": [4.33, 4.38, 4.62], "tr": [1.84, 1.31, 3.05], "eo": [1.48, 2.27, 2.40]},
            "score": {"zs": [84.3, 87.2, 88.4], "tr": [89.6, 80.8, 88.4], "eo": [83.0, 80.1, 78.0]},
            "printed_avg": {
                "time": {"zs": 133.7, "tr": 106.5, "eo": 149.2},
                "cost": {"zs": 4.44, "tr": 2.07, "eo": 2.05},
                "score": {"zs": 86.7, "tr": 86.3, "eo": 80.3},
            },
            "printed_delta": {"time": -20.3, "cost": -53.4},
        },
        "Kimi K2.5": {
            "time": {"zs": [193.5, 498.5, 136.5], "tr": [93.8, 102.4, 95.8], "eo": [336.4, 145.3, 102.0]},
            "cost": {"zs": [1.49, 2.16, 1.57], "tr": [0.63, 0.74, 0.51], "eo": [0.73, 0.43, 0.38]},
            "score": {"zs": [72.0, 48.6, 76.5], "tr": [88.8, 77.9, 79.8], "eo": [55.0, 59.6, 69.8]},
            "printed_avg": {
                "time": {"zs": 276.2, "tr": 97.3, "eo": 194.6},
                "cost": {"zs": 1.74, "tr": 0.62, "eo": 0.52},
                "score": {"zs": 65.7, "tr": 82.2, "eo": 61.5},
            },
            "printed_delta": {"time": -64.8, "cost": -64.2},
        },
    },
    QD: {
        "Claude Opus 4.6": {
            "time": {"zs": [161.3, 114.5, 109.3], "tr": [16.0, 17.5, 12.2], "eo": [150.8, 141.5, 88.8]},
            "cost": {"zs": [7.77, 3.97, 3.69], "tr": [2.78, 1.62, 1.36], "eo": [1.49, 1.44, 1.70]},
            "score": {"zs": [98.9, 97.1, 96.0], "tr": [99.4, 95.5, 96.3], "eo": [97.7, 96.1, 95.5]},
            "printed_avg": {
                "time": {"zs": 128.4, "tr": 15.2, "eo": 127.1},
                "cost": {"zs": 5.15, "tr": 1.92, "eo": 1.55},
                "score": {"zs": 97.3, "tr": 97.1, "eo": 96.4},
            },
            "printed_delta": {"time": -88.1, "cost": -62.7},
        },
        "Claude Sonnet 4.6": {
            "time": {"zs": [82.3, 52.6, 62.0], "tr": [38.0, 11.4, 49.1], "eo": [63.6, 74.6, 27.0]},
            "cost": {"zs": [9.28, 2.75, 3.24], "tr": [2.97, 1.31, 0.79], "eo": [0.82, 0.70, 0.96]},
            "score": {"zs": [99.0, 97.3, 99.4], "tr": [97.9, 97.5, 97.8], "eo": [97.9, 95.9, 97.8]},
            "printed_avg": {
                "time": {"zs": 65.7, "tr": 32.9, "eo": 55.0},
                "cost": {"zs": 5.09, "tr": 1.69, "eo": 0.83},
                "score": {"zs": 98.5, "tr": 97.7, "eo": 97.2},
            },
            "printed_delta": {"time": -49.9, "cost": -66.8},
        },
        "GPT-5.2-Codex": {
            "time": {"zs": [31.2, 90.2, 65.9], "tr": [34.4, 26.3, 39.1], "eo": [18.5, 19.4, 19.0]},
            "cost": {"zs": [2.36, 1.70, 2.34], "tr": [0.52, 0.65, 0.52], "eo": [0.85, 0.79, 0.77]},
            "score": {"zs": [84.6, 87.6, 86.2], "tr": [87.5, 89.6, 89.5], "eo": [88.0, 88.0, 84.4]},
            "printed_avg": {
                "time": {"zs": 62.4, "tr": 33.3, "eo": 18.9},
                "cost": {"zs": 2.13, "tr": 0.56, "eo": 0.80},
                "score": {"zs": 86.1, "tr": 88.9, "eo": 86.8},
            },
            "printed_delta": {"time": -46.7, "cost": -73.5},
        },
        "Gemini 3.1 Pro": {
            "time": {"zs": [40.1, 26.6, 40.8], "tr": [65.7, 21.4, 35.1], "eo": [14.7, 13.7, 18.0]},
            "cost": {"zs": [2.21, 2.02, 2.29], "tr": [0.77, 0.69, 0.92], "eo": [0.68, 0.78, 0.84]},
            "score": {"zs": [91.4, 92.1, 91.3], "tr": [93.3, 91.9, 87.0], "eo": [96.3, 89.4, 91.2]},
            "printed_avg": {
                "time": {"zs": 35.8, "tr": 40.7, "eo": 15.4},
                "cost": {"zs": 2.17, "tr": 0.79, "eo": 0.76},
                "score": {"zs": 91.6, "tr": 90.7, "eo": 92.3},
            },
            "printed_delta": {"time": 13.6, "cost": -63.5},
        },
        "Kimi K2.5": {
            "time": {"zs": [329.6, 735.7, 296.1], "tr": [74.8, 82.9, 68.5], "eo": [314.2, 40.0, 227.5]},
            "cost": {"zs": [1.35, 2.04, 1.06], "tr": [0.27, 0.41, 0.30], "eo": [0.47, 0.24, 0.40]},
            "score": {"zs": [86.7, 77.4, 87.6], "tr": [96.7, 87.0, 90.7], "eo": [79.8, 89.1, 83.2]},
            "printed_avg": {
                "time": {"zs": 453.8, "tr": 75.4, "eo": 193.9},
                "cost": {"zs": 1.48, "tr": 0.33, "eo": 0.37},
                "score": {"zs": 83.9, "tr": 91.5, "eo": 84.0},
            },
            "printed_delta": {"time": -83.4, "cost": -77.9},
        },
    },
}
