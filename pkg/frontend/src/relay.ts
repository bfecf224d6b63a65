/**
 * HTTP front for the browser: static UI, a server-sent-event stream of
 * bridge records, and a POST endpoint forwarding console input upstream.
 *
 * Browsers cannot open raw TCP sockets, so this thin relay pipes the
 * bridge's newline-delimited records into an SSE stream unmodified (one
 * record per event) and forwards KEY/FINISH/STEER records upstream.  It
 * adds no state of its own.
 */

import * as http from 'node:http';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';
import express from 'express';
import { BridgeClient } from './bridgeClient.js';
import type { InboundRecord, OutboundRecord } from './records.js';

export interface RelayOptions {
  bridgeHost: string;
  bridgePort: number;
  staticDir?: string;
}

const OUTBOUND_TYPES = new Set(['KEY', 'FINISH', 'STEER']);

export class Relay {
  readonly app: express.Express;
  private server: http.Server | null = null;
  private bridge: BridgeClient | null = null;
  private subscribers = new Set<express.Response>();
  private lastSessionState: InboundRecord | null = null;

  constructor(private opts: RelayOptions) {
    this.app = express();
    this.app.use(express.json());

    const staticDir =
      opts.staticDir ??
      path.join(path.dirname(fileURLToPath(import.meta.url)), '..', 'static');
    this.app.use(express.static(staticDir));

    this.app.get('/events', (req, res) => {
      res.writeHead(200, {
        'Content-Type': 'text/event-stream',
        'Cache-Control': 'no-cache',
        Connection: 'keep-alive',
      });
      if (this.lastSessionState) {
        res.write(`data: ${JSON.stringify(this.lastSessionState)}\n\n`);
      }
      this.subscribers.add(res);
      req.on('close', () => this.subscribers.delete(res));
    });

    this.app.post('/send', (req, res) => {
      const record = req.body as OutboundRecord;
      if (!record || !OUTBOUND_TYPES.has(record.type)) {
        res.status(400).json({ error: 'record type must be KEY, FINISH or STEER' });
        return;
      }
      if (!this.bridge) {
        res.status(503).json({ error: 'bridge not connected' });
        return;
      }
      this.bridge.send(record);
      res.json({ ok: true });
    });
  }

  private broadcast(record: InboundRecord): void {
    if (record.type === 'SESSION_STATE') this.lastSessionState = record;
    const payload = `data: ${JSON.stringify(record)}\n\n`;
    for (const res of this.subscribers) {
      res.write(payload);
    }
  }

  async start(port: number): Promise<number> {
    this.bridge = await BridgeClient.connect({
      host: this.opts.bridgeHost,
      port: this.opts.bridgePort,
      onRecord: (record) => this.broadcast(record),
      onError: () => undefined,
      onClose: () => {
        for (const res of this.subscribers) res.end();
        this.subscribers.clear();
      },
    });
    return new Promise((resolve) => {
      this.server = this.app.listen(port, '127.0.0.1', () => {
        const addr = this.server!.address();
        resolve(typeof addr === 'object' && addr ? addr.port : port);
      });
    });
  }

  stop(): void {
    this.bridge?.close();
    for (const res of this.subscribers) res.end();
    this.subscribers.clear();
    this.server?.close();
  }
}
