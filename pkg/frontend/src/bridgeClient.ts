/**
 * TCP line client for the auth-client bridge (Node side).
 *
 * Used by the relay that fronts the browser UI, and directly by the
 * scripted end-to-end test.
 */

import * as net from 'node:net';
import {
  decodeInbound,
  encodeRecord,
  InboundRecord,
  LineSplitter,
  OutboundRecord,
} from './records.js';

export interface BridgeClientOptions {
  host: string;
  port: number;
  onRecord: (record: InboundRecord) => void;
  onError?: (err: Error) => void;
  onClose?: () => void;
}

export class BridgeClient {
  private socket: net.Socket;
  private splitter = new LineSplitter();
  private opts: BridgeClientOptions;

  private constructor(socket: net.Socket, opts: BridgeClientOptions) {
    this.socket = socket;
    this.opts = opts;
    socket.setEncoding('utf-8');
    socket.on('data', (chunk: string) => {
      for (const line of this.splitter.push(chunk)) {
        try {
          opts.onRecord(decodeInbound(line));
        } catch (err) {
          opts.onError?.(err as Error);
        }
      }
    });
    socket.on('error', (err) => opts.onError?.(err));
    socket.on('close', () => opts.onClose?.());
  }

  static connect(opts: BridgeClientOptions): Promise<BridgeClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection(
        { host: opts.host, port: opts.port },
        () => resolve(new BridgeClient(socket, opts)),
      );
      socket.once('error', reject);
    });
  }

  send(record: OutboundRecord): void {
    this.socket.write(encodeRecord(record));
  }

  close(): void {
    this.socket.end();
    this.socket.destroy();
  }
}
